#include "skp/nn/param_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace skp::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");
static_assert(sizeof(Scalar) == 8, "checkpoint values are stored as f64");

namespace {

constexpr char kParamMagic[8] = {'S', 'K', 'P', 'P', 'A', 'R', 'A', 'M'};
constexpr char kCheckpointMagic[8] = {'S', 'K', 'P', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kParamVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: unexpected end of data");
  return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(Scalar)));
}

void get_matrix(std::istream& in, Matrix& m) {
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(Scalar)));
  if (!in) throw std::runtime_error("checkpoint: truncated tensor data");
}

}  // namespace

Tensor ParamStore::add(const std::string& name, Matrix init, bool trainable,
                       std::vector<std::size_t> shape) {
  if (contains(name)) throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
  if (shape.empty()) {
    shape = {static_cast<std::size_t>(init.rows()), static_cast<std::size_t>(init.cols())};
  }
  Tensor t(std::move(init), trainable);
  t.reshape_logical(shape);
  params_.push_back({name, t, trainable, std::move(shape), {}, {}});
  return t;
}

bool ParamStore::contains(const std::string& name) const {
  for (const Parameter& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

Tensor ParamStore::get(const std::string& name) const {
  for (const Parameter& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw std::out_of_range("ParamStore: no parameter '" + name + "'");
}

void ParamStore::zero_grad() {
  for (Parameter& p : params_) p.tensor.zero_grad();
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) {
    if (p.trainable) n += static_cast<std::size_t>(p.tensor.value().size());
  }
  return n;
}

void ParamStore::save(std::ostream& out) const {
  out.write(kParamMagic, sizeof(kParamMagic));
  put<std::uint32_t>(out, kParamVersion);
  put<std::uint64_t>(out, step);
  put<std::uint64_t>(out, params_.size());
  for (const Parameter& p : params_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint8_t>(out, p.trainable ? 1 : 0);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.shape.size()));
    for (std::size_t d : p.shape) put<std::uint64_t>(out, d);
    put_matrix(out, p.tensor.value());
    if (p.trainable) {
      const bool has_moments = p.adam_m.size() == p.tensor.value().size();
      put<std::uint8_t>(out, has_moments ? 1 : 0);
      if (has_moments) {
        put_matrix(out, p.adam_m);
        put_matrix(out, p.adam_v);
      }
    }
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

void ParamStore::load(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kParamMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("checkpoint: bad parameter magic");
  }
  if (read_pod<std::uint32_t>(in) != kParamVersion) throw std::runtime_error("checkpoint: unsupported version");
  const auto loaded_step = read_pod<std::uint64_t>(in);
  const auto count = read_pod<std::uint64_t>(in);
  if (count != params_.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (Parameter& p : params_) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in || name != p.name) throw std::runtime_error("checkpoint: expected '" + p.name + "', found '" + name + "'");
    const bool trainable = read_pod<std::uint8_t>(in) != 0;
    if (trainable != p.trainable) throw std::runtime_error("checkpoint: trainable flag mismatch for " + name);
    const auto rank = read_pod<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(in));
    if (shape != p.shape) throw std::runtime_error("checkpoint: shape mismatch for " + name);
    get_matrix(in, p.tensor.mutable_value());
    if (trainable) {
      if (read_pod<std::uint8_t>(in) != 0) {
        p.adam_m.resize(p.tensor.rows(), p.tensor.cols());
        p.adam_v.resize(p.tensor.rows(), p.tensor.cols());
        get_matrix(in, p.adam_m);
        get_matrix(in, p.adam_v);
      } else {
        p.adam_m.resize(0, 0);
        p.adam_v.resize(0, 0);
      }
    }
  }
  step = loaded_step;
}

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  bool any = false;
  for (const Parameter& p : store.params()) {
    if (p.trainable && p.tensor.has_grad()) any = true;
  }
  if (!any) throw std::logic_error("adam_step: missing-grad (no trainable parameter has a gradient)");

  ++store.step;
  const Scalar t = static_cast<Scalar>(store.step);
  const Scalar bc1 = 1 - std::pow(cfg.beta1, t);
  const Scalar bc2 = 1 - std::pow(cfg.beta2, t);
  for (Parameter& p : store.params()) {
    if (!p.trainable || !p.tensor.has_grad()) continue;
    const Matrix& g = p.tensor.grad();
    if (p.adam_m.size() != g.size()) {
      p.adam_m = Matrix::Zero(g.rows(), g.cols());
      p.adam_v = Matrix::Zero(g.rows(), g.cols());
    }
    p.adam_m = cfg.beta1 * p.adam_m + (1 - cfg.beta1) * g;
    p.adam_v = cfg.beta2 * p.adam_v + (1 - cfg.beta2) * g.cwiseAbs2();
    const auto m_hat = p.adam_m.array() / bc1;
    const auto v_hat = p.adam_v.array() / bc2;
    p.tensor.mutable_value().array() -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const std::string& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint64_t>(out, metadata.size());
  out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  store.save(out);
}

namespace {

std::string read_metadata(std::istream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint");
  }
  const auto len = read_pod<std::uint64_t>(in);
  std::string meta(static_cast<std::size_t>(len), '\0');
  in.read(meta.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint: truncated metadata");
  return meta;
}

}  // namespace

std::string load_checkpoint(const std::filesystem::path& path, ParamStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string meta = read_metadata(in, path);
  store.load(in);
  return meta;
}

std::string read_checkpoint_metadata(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_metadata(in, path);
}

}  // namespace skp::nn
