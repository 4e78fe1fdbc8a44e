#include "skp/pipeline/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "skp/geometry/io.hpp"

namespace skp::pipeline {

namespace {

constexpr double kPi = std::numbers::pi;

enum StreamTag : std::uint64_t { kSynthTag = 11, kLoadTag = 12 };

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Vec3 v(g(rng), g(rng), g(rng));
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

void push(PointCloud& c, const Vec3& p, const Vec3& n) {
  c.positions.push_back(p);
  c.normals.push_back(n.normalized());
}

PointCloud sample_sphere(std::size_t count, Rng& rng) {
  PointCloud c;
  for (std::size_t i = 0; i < count; ++i) {
    const Vec3 p = random_unit(rng);
    push(c, p, p);
  }
  return c;
}

PointCloud sample_box(std::size_t count, Rng& rng) {
  const Vec3 a(1.0, uniform(rng, 0.5, 1.0), uniform(rng, 0.5, 1.0));
  const double areas[3] = {a.y() * a.z(), a.x() * a.z(), a.x() * a.y()};
  std::discrete_distribution<int> pick_axis({areas[0], areas[1], areas[2]});
  std::bernoulli_distribution pick_sign(0.5);
  PointCloud c;
  for (std::size_t i = 0; i < count; ++i) {
    const int axis = pick_axis(rng);
    const double sign = pick_sign(rng) ? 1.0 : -1.0;
    Vec3 p;
    for (int d = 0; d < 3; ++d) p[d] = uniform(rng, -a[d], a[d]);
    p[axis] = sign * a[axis];
    Vec3 n = Vec3::Zero();
    n[axis] = sign;
    push(c, p, n);
  }
  return c;
}

PointCloud sample_cylinder(std::size_t count, Rng& rng) {
  const double r = uniform(rng, 0.45, 0.7);
  const double h = uniform(rng, 0.8, 1.1);
  const double side = 2.0 * kPi * r * 2.0 * h;
  const double cap = kPi * r * r;
  std::discrete_distribution<int> pick({side, cap, cap});
  PointCloud c;
  for (std::size_t i = 0; i < count; ++i) {
    const int where = pick(rng);
    const double phi = uniform(rng, 0.0, 2.0 * kPi);
    if (where == 0) {
      const Vec3 radial(std::cos(phi), std::sin(phi), 0.0);
      push(c, Vec3(r * radial.x(), r * radial.y(), uniform(rng, -h, h)), radial);
    } else {
      const double rho = r * std::sqrt(uniform(rng, 0.0, 1.0));
      const double z = where == 1 ? h : -h;
      push(c, Vec3(rho * std::cos(phi), rho * std::sin(phi), z), Vec3(0, 0, where == 1 ? 1 : -1));
    }
  }
  return c;
}

PointCloud sample_cone(std::size_t count, Rng& rng) {
  const double radius = uniform(rng, 0.6, 0.9);
  const double height = uniform(rng, 1.4, 1.8);
  const double slant = std::hypot(radius, height);
  std::discrete_distribution<int> pick({kPi * radius * slant, kPi * radius * radius});
  PointCloud c;
  for (std::size_t i = 0; i < count; ++i) {
    const double phi = uniform(rng, 0.0, 2.0 * kPi);
    const double t = std::sqrt(uniform(rng, 0.0, 1.0));
    if (pick(rng) == 0) {
      const double rho = radius * t;
      const Vec3 p(rho * std::cos(phi), rho * std::sin(phi), height / 2 - height * t);
      push(c, p, Vec3(height * std::cos(phi), height * std::sin(phi), radius));
    } else {
      const double rho = radius * t;
      push(c, Vec3(rho * std::cos(phi), rho * std::sin(phi), -height / 2), Vec3(0, 0, -1));
    }
  }
  return c;
}

PointCloud sample_torus(std::size_t count, Rng& rng) {
  const double big = uniform(rng, 0.65, 0.85);
  const double small = uniform(rng, 0.2, 0.32);
  PointCloud c;
  while (c.size() < count) {
    const double u = uniform(rng, 0.0, 2.0 * kPi);
    const double v = uniform(rng, 0.0, 2.0 * kPi);
    // Area element is proportional to (R + r cos v).
    if (uniform(rng, 0.0, big + small) > big + small * std::cos(v)) continue;
    const Vec3 n(std::cos(v) * std::cos(u), std::cos(v) * std::sin(u), std::sin(v));
    const double ring = big + small * std::cos(v);
    push(c, Vec3(ring * std::cos(u), ring * std::sin(u), small * std::sin(v)), n);
  }
  return c;
}

std::vector<std::filesystem::path> sorted_entries(const std::filesystem::path& dir, bool want_dirs) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (want_dirs ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<const LabeledObject*> Dataset::split(Split which) const {
  std::vector<const LabeledObject*> out;
  for (const LabeledObject& o : objects) {
    if (o.split == which) out.push_back(&o);
  }
  return out;
}

const std::vector<std::string>& shape_names() {
  static const std::vector<std::string> names{"sphere", "box", "cylinder", "cone", "torus"};
  return names;
}

PointCloud sample_shape(const std::string& shape, std::size_t points, Rng& rng) {
  if (shape == "sphere") return sample_sphere(points, rng);
  if (shape == "box") return sample_box(points, rng);
  if (shape == "cylinder") return sample_cylinder(points, rng);
  if (shape == "cone") return sample_cone(points, rng);
  if (shape == "torus") return sample_torus(points, rng);
  throw std::invalid_argument("unknown shape '" + shape + "'");
}

PointCloud synth_object(const std::string& shape, const SynthOptions& opts, Rng& rng) {
  PointCloud cloud = sample_shape(shape, opts.points, rng);
  if (opts.noise > 0.0) {
    std::normal_distribution<double> jitter(0.0, opts.noise);
    for (Vec3& p : cloud.positions) p += Vec3(jitter(rng), jitter(rng), jitter(rng));
  }
  const double axis_angle = uniform(rng, 0.0, 2.0 * kPi);
  const Vec3 axis(std::cos(axis_angle), std::sin(axis_angle), 0.0);
  const double tilt = opts.tilt_max > opts.tilt_min ? uniform(rng, opts.tilt_min, opts.tilt_max) : opts.tilt_min;
  const Mat3 r = rotation_about_z(uniform(rng, 0.0, 2.0 * kPi)) *
                 Eigen::AngleAxisd(tilt, axis).toRotationMatrix();
  const double scale = opts.scale_max > opts.scale_min
                           ? std::exp(uniform(rng, std::log(opts.scale_min), std::log(opts.scale_max)))
                           : opts.scale_min;
  return transform(cloud, r, scale);
}

Dataset synth_dataset(const std::vector<std::string>& classes, std::size_t n_per_class,
                      std::size_t test_per_class, const SynthOptions& opts, std::uint64_t seed) {
  if (classes.size() < 2) throw std::invalid_argument("synth_dataset: need at least 2 classes");
  for (const std::string& c : classes) {
    if (std::find(shape_names().begin(), shape_names().end(), c) == shape_names().end()) {
      throw std::invalid_argument("unknown shape '" + c + "'");
    }
  }
  Dataset ds;
  ds.class_names = classes;
  for (Split split : {Split::train, Split::test}) {
    const std::size_t n = split == Split::train ? n_per_class : test_per_class;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      for (std::size_t k = 0; k < n; ++k) {
        Rng rng = derive_rng(seed, {kSynthTag, static_cast<std::uint64_t>(split), c, k});
        LabeledObject o;
        o.id = ds.objects.size();
        o.cloud = synth_object(classes[c], opts, rng);
        o.label = c;
        o.split = split;
        ds.objects.push_back(std::move(o));
      }
    }
  }
  return ds;
}

SynthOptions synth_options(const RunConfig& cfg) {
  SynthOptions o;
  o.points = cfg.points;
  o.noise = cfg.noise;
  o.scale_min = cfg.scale_min;
  o.scale_max = cfg.scale_max;
  o.tilt_min = cfg.tilt_min;
  o.tilt_max = cfg.tilt_max;
  return o;
}

Dataset load_directory_dataset(const std::filesystem::path& root, std::size_t points,
                               std::uint64_t seed) {
  if (!std::filesystem::is_directory(root)) {
    throw std::runtime_error("dataset directory not found: " + root.string());
  }
  const bool split_layout =
      std::filesystem::is_directory(root / "train") || std::filesystem::is_directory(root / "test");
  std::vector<std::pair<std::filesystem::path, Split>> split_roots;
  if (split_layout) {
    if (std::filesystem::is_directory(root / "train")) split_roots.emplace_back(root / "train", Split::train);
    if (std::filesystem::is_directory(root / "test")) split_roots.emplace_back(root / "test", Split::test);
  } else {
    split_roots.emplace_back(root, Split::train);
  }

  Dataset ds;
  for (const auto& [dir, split] : split_roots) {
    for (const auto& class_dir : sorted_entries(dir, true)) {
      const std::string name = class_dir.filename().string();
      if (std::find(ds.class_names.begin(), ds.class_names.end(), name) == ds.class_names.end()) {
        ds.class_names.push_back(name);
      }
    }
  }
  std::sort(ds.class_names.begin(), ds.class_names.end());

  for (const auto& [dir, split] : split_roots) {
    for (const auto& class_dir : sorted_entries(dir, true)) {
      const auto label = static_cast<std::size_t>(
          std::find(ds.class_names.begin(), ds.class_names.end(), class_dir.filename().string()) -
          ds.class_names.begin());
      for (const auto& file : sorted_entries(class_dir, false)) {
        LabeledObject o;
        o.id = ds.objects.size();
        Rng rng = derive_rng(seed, {kLoadTag, o.id});
        PointCloud cloud = load_cloud(file);
        if (cloud.has_faces()) {
          cloud = sample_surface(cloud, points, rng);
        } else if (cloud.size() > points) {
          std::vector<std::size_t> idx(cloud.size());
          for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
          std::shuffle(idx.begin(), idx.end(), rng);
          idx.resize(points);
          std::sort(idx.begin(), idx.end());
          PointCloud sub;
          for (std::size_t i : idx) {
            sub.positions.push_back(cloud.positions[i]);
            sub.normals.push_back(cloud.normals[i]);
          }
          cloud = std::move(sub);
        }
        Vec3 lo = cloud.positions.front(), hi = lo;
        for (const Vec3& p : cloud.positions) {
          lo = lo.cwiseMin(p);
          hi = hi.cwiseMax(p);
        }
        const Vec3 mid = 0.5 * (lo + hi);
        for (Vec3& p : cloud.positions) p -= mid;
        o.cloud = std::move(cloud);
        o.label = label;
        o.split = split;
        ds.objects.push_back(std::move(o));
      }
    }
  }
  if (ds.objects.empty()) throw std::runtime_error("no point clouds found under " + root.string());
  return ds;
}

Dataset load_dataset(const RunConfig& cfg) {
  if (!cfg.data_dir.empty()) return load_directory_dataset(cfg.data_dir, cfg.points, cfg.seed);
  return synth_dataset(cfg.classes, cfg.per_class, cfg.test_per_class, synth_options(cfg), cfg.seed);
}

PointCloud augment_occlusion(const PointCloud& cloud, Rng& rng) {
  if (cloud.empty()) throw std::invalid_argument("augment_occlusion: empty cloud");
  std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
  const std::size_t min_keep = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(cloud.size())));
  for (int attempt = 0; attempt < 10; ++attempt) {
    const Vec3 ref = cloud.normals[pick(rng)];
    PointCloud out;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (cloud.normals[i].dot(ref) > 0.0) {
        out.positions.push_back(cloud.positions[i]);
        out.normals.push_back(cloud.normals[i]);
      }
    }
    if (out.size() >= min_keep && !out.empty()) return out;
  }
  return cloud;
}

PointCloud augment_normal_noise(const PointCloud& cloud, double sigma_angle, Rng& rng) {
  if (sigma_angle < 0.0) throw std::invalid_argument("augment_normal_noise: sigma must be >= 0");
  PointCloud out = cloud;
  if (sigma_angle == 0.0) return out;
  std::normal_distribution<double> angle(0.0, sigma_angle);
  for (Vec3& n : out.normals) {
    Vec3 axis;
    do {
      const Vec3 g = random_unit(rng);
      axis = g - g.dot(n) * n;
    } while (axis.norm() < 1e-6);
    axis.normalize();
    const double theta = std::abs(angle(rng));
    n = (n * std::cos(theta) + axis.cross(n) * std::sin(theta)).normalized();
  }
  return out;
}

VariantSpec parse_variant(const std::string& variant) {
  VariantSpec spec;
  std::stringstream ss(variant);
  std::string token;
  bool crop_seen = false;
  while (std::getline(ss, token, '+')) {
    if (token == "none") continue;
    if (token == "background") {
      spec.background = true;
      continue;
    }
    if (crop_seen) throw std::invalid_argument("variant '" + variant + "': more than one crop");
    crop_seen = true;
    if (token == "t25") {
      spec.shift = 0.25;
    } else if (token == "t50") {
      spec.shift = 0.5;
    } else if (token == "t50_rs") {
      spec.shift = 0.5;
      spec.rescale_rotate = true;
    } else {
      throw std::invalid_argument("unknown eval variant '" + token + "'");
    }
  }
  return spec;
}

LabeledObject add_background(const LabeledObject& object, double fraction, Rng& rng) {
  if (fraction < 0.0 || fraction >= 1.0) throw std::invalid_argument("clutter fraction must be in [0, 1)");
  LabeledObject out = object;
  out.cloud.faces.clear();
  out.clutter.assign(object.cloud.size(), false);
  out.has_background = true;
  const std::size_t n = object.cloud.size();
  const auto target = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction / (1.0 - fraction)));
  if (target == 0) return out;

  const Vec3 c = centroid(object.cloud.positions);
  const double radius = std::max(bounding_radius(object.cloud.positions), 1e-9);
  const std::size_t patch = std::max<std::size_t>(8, n / 16);
  std::size_t added = 0;
  while (added < target) {
    Vec3 at;
    do {
      at = c + Vec3(uniform(rng, -2.5, 2.5), uniform(rng, -2.5, 2.5), uniform(rng, -2.5, 2.5)) * radius;
    } while ((at - c).norm() < 1.3 * radius);
    const Vec3 dir = random_unit(rng);
    const double size = radius * uniform(rng, 0.15, 0.35);
    const bool disk = std::bernoulli_distribution(0.5)(rng);
    const Vec3 t1 = dir.unitOrthogonal();
    const Vec3 t2 = dir.cross(t1);
    const std::size_t count = std::min(patch, target - added);
    for (std::size_t i = 0; i < count; ++i) {
      if (disk) {
        const double rho = size * std::sqrt(uniform(rng, 0.0, 1.0));
        const double phi = uniform(rng, 0.0, 2.0 * kPi);
        push(out.cloud, at + rho * (std::cos(phi) * t1 + std::sin(phi) * t2), dir);
      } else {
        // Spherical cap of half-angle 60 degrees around `dir`.
        const double cz = uniform(rng, 0.5, 1.0);
        const double s = std::sqrt(1.0 - cz * cz);
        const double phi = uniform(rng, 0.0, 2.0 * kPi);
        const Vec3 q = cz * dir + s * (std::cos(phi) * t1 + std::sin(phi) * t2);
        push(out.cloud, at + size * (q - dir), q);
      }
      out.clutter.push_back(true);
    }
    added += count;
  }
  return out;
}

LabeledObject crop_to_window(const LabeledObject& object, const Vec3& box_min, const Vec3& box_max,
                             const Vec3& offset) {
  LabeledObject out = object;
  out.cloud = PointCloud{};
  out.clutter.clear();
  const Vec3 lo = box_min + offset;
  const Vec3 hi = box_max + offset;
  for (std::size_t i = 0; i < object.cloud.size(); ++i) {
    const Vec3& p = object.cloud.positions[i];
    if ((p.array() >= lo.array()).all() && (p.array() <= hi.array()).all()) {
      out.cloud.positions.push_back(p);
      out.cloud.normals.push_back(object.cloud.normals[i]);
      if (!object.clutter.empty()) out.clutter.push_back(object.clutter[i]);
    }
  }
  return out;
}

PerturbResult perturb_eval_variant(const LabeledObject& object, const std::string& variant,
                                   double clutter_fraction, Rng& rng) {
  const VariantSpec spec = parse_variant(variant);
  PerturbResult result;
  result.object = object;
  if (object.cloud.empty()) throw std::invalid_argument("perturb_eval_variant: empty cloud");

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::size_t i = 0; i < object.cloud.size(); ++i) {
    if (!object.clutter.empty() && object.clutter[i]) continue;
    lo = lo.cwiseMin(object.cloud.positions[i]);
    hi = hi.cwiseMax(object.cloud.positions[i]);
  }

  if (spec.background) result.object = add_background(result.object, clutter_fraction, rng);
  if (spec.shift > 0.0) {
    const Vec3 extent = hi - lo;
    Vec3 offset;
    for (int d = 0; d < 3; ++d) offset[d] = uniform(rng, -spec.shift, spec.shift) * extent[d];
    result.object = crop_to_window(result.object, lo, hi, offset);
  }
  if (spec.rescale_rotate) {
    const double s = uniform(rng, 0.5, 2.0);
    result.object.cloud = transform(result.object.cloud, rotation_about_z(uniform(rng, 0.0, 2.0 * kPi)), s);
  }
  result.skipped = result.object.cloud.size() < 16;
  return result;
}

}  // namespace skp::pipeline
