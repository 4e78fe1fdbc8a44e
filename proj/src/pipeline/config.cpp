#include "skp/pipeline/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "skp/geometry/io.hpp"

namespace skp::pipeline {

Pooling parse_pooling(const std::string& name) {
  if (name == "votemaxpool") return Pooling::votemaxpool;
  if (name == "maxpool") return Pooling::maxpool;
  throw ConfigError("unknown pooling '" + name + "' (expected votemaxpool|maxpool)");
}

std::string to_string(Pooling pooling) {
  return pooling == Pooling::votemaxpool ? "votemaxpool" : "maxpool";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + text + "'");
}

std::string show(double v) { return format_double(v); }
std::string show(bool v) { return v ? "true" : "false"; }
std::string show(std::uint64_t v) { return std::to_string(v); }
std::string show(const std::string& v) { return v; }

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, std::string>) {
      out += items[i];
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

struct Key {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Access>
Key scalar_key(std::string name, Access access) {
  using T = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
  Key k;
  k.name = name;
  k.get = [access](const RunConfig& c) {
    const T& v = access(const_cast<RunConfig&>(c));
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      return show(static_cast<std::uint64_t>(v));
    } else {
      return show(v);
    }
  };
  k.set = [access, name](RunConfig& c, const std::string& text) {
    T& v = access(c);
    if constexpr (std::is_same_v<T, bool>) {
      v = parse_bool(name, text);
    } else if constexpr (std::is_same_v<T, std::string>) {
      v = text;
    } else {
      v = parse_number<T>(name, text);
    }
  };
  return k;
}

Key degrees_key(std::string name, double& (*access)(RunConfig&)) {
  Key k;
  k.name = name;
  k.get = [access](const RunConfig& c) {
    return show(access(const_cast<RunConfig&>(c)) * 180.0 / std::numbers::pi);
  };
  k.set = [access, name](RunConfig& c, const std::string& text) {
    access(c) = parse_number<double>(name, text) * std::numbers::pi / 180.0;
  };
  return k;
}

Key widths_key(std::string name, std::vector<nn::Index>& (*access)(RunConfig&)) {
  Key k;
  k.name = name;
  k.get = [access](const RunConfig& c) { return join(access(const_cast<RunConfig&>(c))); };
  k.set = [access, name](RunConfig& c, const std::string& text) {
    std::vector<nn::Index> widths;
    for (const auto& item : split_list(text)) widths.push_back(parse_number<nn::Index>(name, item));
    access(c) = std::move(widths);
  };
  return k;
}

Key names_key(std::string name, std::vector<std::string>& (*access)(RunConfig&)) {
  Key k;
  k.name = name;
  k.get = [access](const RunConfig& c) { return join(access(const_cast<RunConfig&>(c))); };
  k.set = [access](RunConfig& c, const std::string& text) { access(c) = split_list(text); };
  return k;
}

const std::vector<Key>& key_table() {
  static const std::vector<Key> table = [] {
    std::vector<Key> t;
    t.push_back(scalar_key("seed", [](RunConfig& c) -> auto& { return c.seed; }));
    t.push_back(scalar_key("threads", [](RunConfig& c) -> auto& { return c.threads; }));
    t.push_back(scalar_key("data.dir", [](RunConfig& c) -> auto& { return c.data_dir; }));
    t.push_back(names_key("data.classes", [](RunConfig& c) -> auto& { return c.classes; }));
    t.push_back(scalar_key("data.per_class", [](RunConfig& c) -> auto& { return c.per_class; }));
    t.push_back(scalar_key("data.test_per_class", [](RunConfig& c) -> auto& { return c.test_per_class; }));
    t.push_back(scalar_key("data.points", [](RunConfig& c) -> auto& { return c.points; }));
    t.push_back(scalar_key("data.noise", [](RunConfig& c) -> auto& { return c.noise; }));
    t.push_back(scalar_key("data.scale_min", [](RunConfig& c) -> auto& { return c.scale_min; }));
    t.push_back(scalar_key("data.scale_max", [](RunConfig& c) -> auto& { return c.scale_max; }));
    t.push_back(scalar_key("data.tilt_min", [](RunConfig& c) -> auto& { return c.tilt_min; }));
    t.push_back(scalar_key("data.tilt_max", [](RunConfig& c) -> auto& { return c.tilt_max; }));
    t.push_back(scalar_key("grow.angle_threshold", [](RunConfig& c) -> auto& { return c.grow.angle_threshold; }));
    t.push_back(scalar_key("grow.max_parts", [](RunConfig& c) -> auto& { return c.grow.max_parts; }));
    t.push_back(scalar_key("grow.points_per_part", [](RunConfig& c) -> auto& { return c.grow.points_per_part; }));
    t.push_back(scalar_key("grow.knn", [](RunConfig& c) -> auto& { return c.grow.knn; }));
    t.push_back(scalar_key("grow.real_multiplier", [](RunConfig& c) -> auto& { return c.grow.real_data_multiplier; }));
    t.push_back(scalar_key("grow.real_data", [](RunConfig& c) -> auto& { return c.grow.real_data; }));
    t.push_back(scalar_key("connect.spatial_fallback", [](RunConfig& c) -> auto& { return c.connect.use_spatial_fallback; }));
    t.push_back(degrees_key("connect.cone_deg", [](RunConfig& c) -> double& { return c.connect.cone_half_angle; }));
    t.push_back(degrees_key("connect.back_cone_deg", [](RunConfig& c) -> double& { return c.connect.back_cone_half_angle; }));
    t.push_back(widths_key("model.encoder_widths", [](RunConfig& c) -> auto& { return c.encoder_widths; }));
    t.push_back(widths_key("model.conv_widths", [](RunConfig& c) -> auto& { return c.conv_widths; }));
    t.push_back({"model.layer", [](const RunConfig& c) { return conv::to_string(c.layer); },
                 [](RunConfig& c, const std::string& v) {
                   try {
                     c.layer = conv::parse_conv_kind(v);
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(e.what());
                   }
                 }});
    t.push_back({"model.pooling", [](const RunConfig& c) { return to_string(c.pooling); },
                 [](RunConfig& c, const std::string& v) { c.pooling = parse_pooling(v); }});
    t.push_back(scalar_key("model.self_loop", [](RunConfig& c) -> auto& { return c.self_loop; }));
    t.push_back(scalar_key("kernel.sphere_count", [](RunConfig& c) -> auto& { return c.kernel_sphere_count; }));
    t.push_back(scalar_key("kernel.origin", [](RunConfig& c) -> auto& { return c.kernel_origin; }));
    t.push_back(scalar_key("kernel.sigma", [](RunConfig& c) -> auto& { return c.kernel_sigma; }));
    t.push_back(scalar_key("kernel.use_lrf", [](RunConfig& c) -> auto& { return c.use_lrf; }));
    t.push_back(scalar_key("vote.num_clusters", [](RunConfig& c) -> auto& { return c.vote.num_clusters; }));
    t.push_back(scalar_key("vote.radius_fraction", [](RunConfig& c) -> auto& { return c.vote.radius_fraction; }));
    t.push_back(scalar_key("vote.lambda", [](RunConfig& c) -> auto& { return c.vote.lambda; }));
    t.push_back(scalar_key("vote.normalize", [](RunConfig& c) -> auto& { return c.vote.normalize_by_radius; }));
    t.push_back(scalar_key("train.epochs", [](RunConfig& c) -> auto& { return c.epochs; }));
    t.push_back(scalar_key("train.batch_size", [](RunConfig& c) -> auto& { return c.batch_size; }));
    t.push_back(scalar_key("train.lr", [](RunConfig& c) -> auto& { return c.lr; }));
    t.push_back(scalar_key("aug.occlusion_prob", [](RunConfig& c) -> auto& { return c.occlusion_prob; }));
    t.push_back(scalar_key("aug.normal_noise", [](RunConfig& c) -> auto& { return c.normal_noise; }));
    t.push_back(names_key("eval.variants", [](RunConfig& c) -> auto& { return c.eval_variants; }));
    t.push_back(scalar_key("eval.clutter_fraction", [](RunConfig& c) -> auto& { return c.clutter_fraction; }));
    return t;
  }();
  return table;
}

const Key& find_key(const std::string& name) {
  for (const Key& k : key_table()) {
    if (k.name == name) return k;
  }
  throw ConfigError("unknown config key '" + name + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "config_version") {
    if (parse_number<int>(key, value) != kVersion) {
      throw ConfigError("unsupported config_version " + value);
    }
    return;
  }
  find_key(key).set(*this, trim(value));
}

std::string RunConfig::get(const std::string& key) const {
  if (key == "config_version") return std::to_string(kVersion);
  return find_key(key).get(*this);
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out{"config_version"};
  for (const Key& k : key_table()) out.push_back(k.name);
  return out;
}

void RunConfig::merge_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str());
}

std::string RunConfig::to_text() const {
  std::string out = "config_version=" + std::to_string(kVersion) + "\n";
  for (const Key& k : key_table()) out += k.name + "=" + k.get(*this) + "\n";
  return out;
}

void RunConfig::validate() const {
  try {
    grow.validate();
    vote.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (classes.size() < 2 && data_dir.empty()) throw ConfigError("data.classes: need at least 2 classes");
  if (points < 16) throw ConfigError("data.points must be >= 16");
  if (!(scale_min > 0.0) || scale_max < scale_min) throw ConfigError("data.scale_min/max: need 0 < min <= max");
  if (tilt_min < 0.0 || tilt_max < tilt_min) throw ConfigError("data.tilt_min/max: need 0 <= min <= max");
  if (encoder_widths.empty()) throw ConfigError("model.encoder_widths: empty");
  if (conv_widths.empty()) throw ConfigError("model.conv_widths: empty");
  for (nn::Index w : encoder_widths) {
    if (w < 1) throw ConfigError("model.encoder_widths: widths must be >= 1");
  }
  for (nn::Index w : conv_widths) {
    if (w < 2) throw ConfigError("model.conv_widths: widths must be >= 2");
  }
  if (kernel_sphere_count < 2) throw ConfigError("kernel.sphere_count must be >= 2");
  if (!(kernel_sigma > 0.0)) throw ConfigError("kernel.sigma must be > 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
  if (occlusion_prob < 0.0 || occlusion_prob > 1.0) throw ConfigError("aug.occlusion_prob must be in [0, 1]");
  if (normal_noise < 0.0) throw ConfigError("aug.normal_noise must be >= 0");
  if (clutter_fraction < 0.0 || clutter_fraction >= 1.0) {
    throw ConfigError("eval.clutter_fraction must be in [0, 1)");
  }
}

}  // namespace skp::pipeline
