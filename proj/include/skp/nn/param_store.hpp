#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "skp/nn/tensor.hpp"

namespace skp::nn {

struct Parameter {
  std::string name;
  Tensor tensor;
  bool trainable = true;
  std::vector<std::size_t> shape;
  Matrix adam_m;  // first moment, same shape as the value once stepped
  Matrix adam_v;  // second moment
};

/// Named parameters in registration order, plus optimizer state.
///
/// Non-trainable entries hold buffers such as batch-norm running statistics;
/// they are checkpointed but never stepped.
class ParamStore {
 public:
  /// Registers a tensor. Throws std::invalid_argument on a duplicate name.
  Tensor add(const std::string& name, Matrix init, bool trainable = true,
             std::vector<std::size_t> shape = {});

  [[nodiscard]] bool contains(const std::string& name) const;
  [[nodiscard]] Tensor get(const std::string& name) const;
  [[nodiscard]] const std::vector<Parameter>& params() const { return params_; }
  std::vector<Parameter>& params() { return params_; }

  void zero_grad();
  [[nodiscard]] std::size_t trainable_count() const;

  std::uint64_t step = 0;

  /// Binary, little-endian:
  ///   magic "SKPPARAM", u32 version (1), u64 step, u64 entry count, then per
  ///   entry: u32 name length, name bytes, u8 trainable, u32 rank, u64 dims,
  ///   f64 values; trainable entries append u8 has_moments and, when set,
  ///   the first and second Adam moments as f64 arrays.
  void save(std::ostream& out) const;

  /// Restores values and optimizer state into an already-registered store.
  /// Names, order and shapes must match exactly.
  void load(std::istream& in);

 private:
  std::vector<Parameter> params_;
};

struct AdamConfig {
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

/// One bias-corrected Adam step over every trainable parameter that has a
/// gradient. Parameters without a gradient are left untouched. Throws
/// std::logic_error (missing-grad) when no trainable parameter has one.
void adam_step(ParamStore& store, const AdamConfig& cfg);

/// Checkpoint file: magic "SKPCKPT1", u64 metadata length, metadata bytes
/// (the run configuration), then the ParamStore payload.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const std::string& metadata);
std::string load_checkpoint(const std::filesystem::path& path, ParamStore& store);
/// Reads only the metadata block.
std::string read_checkpoint_metadata(const std::filesystem::path& path);

}  // namespace skp::nn
