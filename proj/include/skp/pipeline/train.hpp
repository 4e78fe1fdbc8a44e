#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "skp/pipeline/dataset.hpp"
#include "skp/pipeline/model.hpp"

namespace skp::pipeline {

/// Raised when a batch produces a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::vector<std::size_t> object_ids)
      : std::runtime_error(what), object_ids(std::move(object_ids)) {}
  std::vector<std::size_t> object_ids;
};

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0: hardware
/// concurrency). The first exception is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

/// Graph construction for many objects. Object i uses a stream derived
/// from (seed, tag, object id) so results do not depend on scheduling.
std::vector<PreparedObject> prepare_all(const std::vector<const LabeledObject*>& objects,
                                        const RunConfig& cfg, std::uint64_t tag);

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double class_loss = 0.0;
  double vote_loss = 0.0;
  double accuracy = 0.0;  // running accuracy of the training-mode forward passes
};

struct TrainOptions {
  /// When set, a checkpoint and the loss curve are written here every epoch.
  std::filesystem::path out_dir;
  std::vector<std::string> class_names;
  std::ostream* log = nullptr;
};

struct TrainResult {
  std::vector<EpochStats> curve;
  double wall_seconds = 0.0;
};

TrainResult train_model(Model& model, const std::vector<const LabeledObject*>& train_set,
                        const TrainOptions& opts);

struct MetricsReport {
  std::string variant = "none";
  std::vector<std::string> class_names;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t skipped = 0;
  double wall_seconds = 0.0;
  std::string config_text;

  [[nodiscard]] std::size_t evaluated() const;
  [[nodiscard]] double accuracy() const;
  /// Mean recall over classes with at least one sample.
  [[nodiscard]] double class_mean_accuracy() const;
};

/// Inference over `objects` under one perturbation variant. Throws on an
/// empty object list and on labels outside the model's class set.
MetricsReport evaluate_model(const Model& model, const std::vector<const LabeledObject*>& objects,
                             const std::vector<std::string>& class_names, const std::string& variant);

/// Predicted classes without perturbation, one per object.
std::vector<std::size_t> predict(const Model& model, const std::vector<const LabeledObject*>& objects,
                                 std::uint64_t tag);

/// Notes that the published benchmark numbers are out of reach here.
std::string provenance_note();

/// Aligned human-readable table: config, per-variant metrics, confusion
/// matrices, provenance note.
std::string format_report(const std::vector<MetricsReport>& reports, const std::string& config_text);

/// `metric<TAB>variant<TAB>value` lines preceded by `# key=value` config lines.
std::string format_metrics_tsv(const std::vector<MetricsReport>& reports, const std::string& config_text);

/// Checkpoint metadata: class names plus the full config.
std::string checkpoint_metadata(const RunConfig& cfg, const std::vector<std::string>& class_names);
void parse_checkpoint_metadata(const std::string& meta, RunConfig& cfg,
                               std::vector<std::string>& class_names);

struct AblationCell {
  conv::ConvKind layer = conv::ConvKind::skpconv;
  Pooling pooling = Pooling::votemaxpool;
  std::string variant;
  std::vector<double> accuracies;  // one per seed

  [[nodiscard]] double mean() const;
};

struct AblationResult {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationCell> cells;

  [[nodiscard]] const AblationCell& cell(conv::ConvKind layer, Pooling pooling,
                                         const std::string& variant) const;
};

/// Layer x pooling grid on the synthetic corpus; every setting is trained
/// from scratch per seed and evaluated on the test split under `variants`.
AblationResult run_ablation(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                            const std::vector<std::string>& variants, std::ostream* log = nullptr);

std::string format_ablation(const AblationResult& result, const std::string& config_text);

}  // namespace skp::pipeline
