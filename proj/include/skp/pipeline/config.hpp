#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "skp/conv/kernel_conv.hpp"
#include "skp/parts/part_graph.hpp"
#include "skp/voting/voting.hpp"

namespace skp::pipeline {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Pooling { votemaxpool, maxpool };

Pooling parse_pooling(const std::string& name);
std::string to_string(Pooling pooling);

/// Everything that determines a run. Serialized as flat `key=value` lines.
struct RunConfig {
  static constexpr int kVersion = 1;

  std::uint64_t seed = 1;
  std::size_t threads = 0;  // 0: hardware concurrency

  // Data. An empty `data_dir` selects the synthetic corpus.
  std::string data_dir;
  std::vector<std::string> classes{"sphere", "box", "cylinder", "torus"};
  std::size_t per_class = 50;
  std::size_t test_per_class = 10;
  std::size_t points = 1024;
  double noise = 0.0;
  double scale_min = 0.2;
  double scale_max = 5.0;
  double tilt_min = 0.1;
  double tilt_max = 0.3;

  GrowConfig grow;
  ConnectConfig connect;

  std::vector<nn::Index> encoder_widths{64, 128, 256};
  std::vector<nn::Index> conv_widths{256, 256, 256, 256};
  conv::ConvKind layer = conv::ConvKind::skpconv;
  Pooling pooling = Pooling::votemaxpool;
  bool self_loop = true;

  std::size_t kernel_sphere_count = 14;
  bool kernel_origin = true;
  double kernel_sigma = 0.7;
  bool use_lrf = true;

  voting::VoteConfig vote;

  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  double occlusion_prob = 0.0;
  double normal_noise = 0.0;

  std::vector<std::string> eval_variants{"none"};
  double clutter_fraction = 0.5;

  /// Applies one `key=value` assignment. Unknown keys and malformed values
  /// throw ConfigError.
  void set(const std::string& key, const std::string& value);
  [[nodiscard]] std::string get(const std::string& key) const;
  [[nodiscard]] static std::vector<std::string> keys();

  /// Parses a config file body; `config_version` must match when present.
  void merge_text(const std::string& text);
  void merge_file(const std::filesystem::path& path);

  /// One `key=value` line per key, starting with config_version.
  [[nodiscard]] std::string to_text() const;

  void validate() const;
};

}  // namespace skp::pipeline
