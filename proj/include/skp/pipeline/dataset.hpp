#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "skp/geometry/point_cloud.hpp"
#include "skp/geometry/sampling.hpp"
#include "skp/pipeline/config.hpp"

namespace skp::pipeline {

enum class Split { train, test };

struct LabeledObject {
  std::size_t id = 0;
  PointCloud cloud;
  std::size_t label = 0;
  Split split = Split::train;
  bool has_background = false;
  /// Per-point flag for injected clutter (empty when there is none).
  std::vector<bool> clutter;
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<LabeledObject> objects;

  [[nodiscard]] std::vector<const LabeledObject*> split(Split which) const;
};

/// Names accepted by sample_shape.
const std::vector<std::string>& shape_names();

/// Area-uniform samples of a parametric shape at its canonical size
/// (unit sphere, or proportions drawn from `rng`), centered at the origin,
/// with analytic unit normals. Throws std::invalid_argument for unknown
/// names.
PointCloud sample_shape(const std::string& shape, std::size_t points, Rng& rng);

struct SynthOptions {
  std::size_t points = 1024;
  double noise = 0.0;  // positional jitter, relative to the canonical size
  double scale_min = 1.0;
  double scale_max = 1.0;
  double tilt_min = 0.0;
  double tilt_max = 0.0;
};

/// One shape instance: sampled, jittered, tilted about a random horizontal
/// axis, spun about z and scaled log-uniformly.
PointCloud synth_object(const std::string& shape, const SynthOptions& opts, Rng& rng);

/// `n_per_class` train and `test_per_class` test objects per class. Object
/// ids are sequential; each object draws from its own derived stream.
Dataset synth_dataset(const std::vector<std::string>& classes, std::size_t n_per_class,
                      std::size_t test_per_class, const SynthOptions& opts, std::uint64_t seed);

SynthOptions synth_options(const RunConfig& cfg);

/// Class-per-subdirectory corpus: `root/<class>/*` or
/// `root/{train,test}/<class>/*`. Meshes are surface-sampled to `points`,
/// larger clouds subsampled; every object is centered on its bounding box.
Dataset load_directory_dataset(const std::filesystem::path& root, std::size_t points,
                               std::uint64_t seed);

/// Synthetic corpus or directory corpus, depending on `data.dir`.
Dataset load_dataset(const RunConfig& cfg);

/// Keeps the points whose normals face a randomly chosen point's normal.
/// Retries up to 10 times while fewer than 5% survive, then returns the
/// input unchanged. Faces are dropped from the output.
PointCloud augment_occlusion(const PointCloud& cloud, Rng& rng);

/// Rotates each normal about a random axis perpendicular to it by an angle
/// drawn from |N(0, sigma)|.
PointCloud augment_normal_noise(const PointCloud& cloud, double sigma_angle, Rng& rng);

/// Evaluation perturbation. `variant` is `none`, `t25`, `t50`, `t50_rs`,
/// `background`, or `background+` followed by one of the crops.
struct PerturbResult {
  LabeledObject object;
  bool skipped = false;  // crop kept fewer than 16 points
};

struct VariantSpec {
  bool background = false;
  double shift = 0.0;
  bool rescale_rotate = false;
};

VariantSpec parse_variant(const std::string& variant);

/// Scatters clutter patches around the object until they make up
/// `fraction` of the output points.
LabeledObject add_background(const LabeledObject& object, double fraction, Rng& rng);

PerturbResult perturb_eval_variant(const LabeledObject& object, const std::string& variant,
                                   double clutter_fraction, Rng& rng);

/// Crop-window shift drawn for the crop variants, exposed for testing:
/// keeps points inside the object box translated by `offset`.
LabeledObject crop_to_window(const LabeledObject& object, const Vec3& box_min, const Vec3& box_max,
                             const Vec3& offset);

}  // namespace skp::pipeline
