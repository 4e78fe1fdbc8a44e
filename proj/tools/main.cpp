// Command line front end: synth, graph, train, eval, ablate, check.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "skp/geometry/io.hpp"
#include "skp/parts/interchange.hpp"
#include "skp/pipeline/config.hpp"
#include "skp/pipeline/dataset.hpp"
#include "skp/pipeline/model.hpp"
#include "skp/pipeline/selfcheck.hpp"
#include "skp/pipeline/train.hpp"

namespace fs = std::filesystem;
using namespace skp;
using namespace skp::pipeline;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFailure = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

/// Config file first, then `--key=value` overrides in command-line order.
RunConfig build_config(const std::string& config_file, const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (!config_file.empty()) cfg.merge_file(config_file);
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

int cmd_synth(const RunConfig& cfg, const fs::path& out) {
  const Dataset ds = load_dataset(cfg);
  for (const LabeledObject& o : ds.objects) {
    const fs::path dir = out / (o.split == Split::train ? "train" : "test") / ds.class_names[o.label];
    fs::create_directories(dir);
    save_cloud(dir / (std::to_string(o.id) + ".xyz"), o.cloud);
  }
  write_text(out / "config.txt", cfg.to_text());
  std::cout << "wrote " << ds.objects.size() << " objects (" << ds.class_names.size() << " classes) to "
            << out.string() << "\n";
  return kOk;
}

int cmd_graph(const RunConfig& cfg, const fs::path& in, const fs::path& out, const std::string& format) {
  const PointCloud cloud = format.empty() ? load_cloud(in) : load_cloud(in, parse_format(format));
  Rng rng = derive_rng(cfg.seed, {1});
  const PartGraph graph = build_part_graph(cloud, cfg.grow, cfg.connect, rng);
  std::ofstream file(out);
  if (!file) throw std::runtime_error("cannot write " + out.string());
  write_part_graph(file, graph);
  std::cout << graph.parts.size() << " parts, " << graph.edges.size() << " edges -> " << out.string() << "\n";
  return kOk;
}

int cmd_train(const RunConfig& cfg, const fs::path& out) {
  const Dataset ds = load_dataset(cfg);
  const auto train = ds.split(Split::train);
  const auto test = ds.split(Split::test);
  Model model(cfg, ds.class_names.size());
  TrainOptions opts;
  opts.out_dir = out;
  opts.class_names = ds.class_names;
  opts.log = &std::cout;
  std::cout << "training on " << train.size() << " objects, " << model.params().trainable_count()
            << " parameters\n";
  const TrainResult tr = train_model(model, train, opts);

  std::vector<MetricsReport> reports;
  reports.push_back(evaluate_model(model, train, ds.class_names, "none"));
  reports.back().variant = "train";
  if (!test.empty()) {
    for (const std::string& v : cfg.eval_variants) reports.push_back(evaluate_model(model, test, ds.class_names, v));
  }
  const std::string report = format_report(reports, cfg.to_text());
  std::cout << "\ntraining took " << tr.wall_seconds << " s\n\n" << report;
  write_text(out / "report.txt", report);
  write_text(out / "metrics.tsv", format_metrics_tsv(reports, cfg.to_text()));
  return kOk;
}

int cmd_eval(const fs::path& checkpoint, const std::string& config_file,
             const std::vector<std::pair<std::string, std::string>>& overrides, const std::string& out,
             const std::string& split_name) {
  RunConfig cfg;
  std::vector<std::string> classes;
  parse_checkpoint_metadata(nn::read_checkpoint_metadata(checkpoint), cfg, classes);
  if (!config_file.empty()) cfg.merge_file(config_file);
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  cfg.validate();

  Model model(cfg, classes.size());
  nn::load_checkpoint(checkpoint, model.params());
  const Dataset ds = load_dataset(cfg);
  if (ds.class_names != classes) {
    throw std::runtime_error("class-set mismatch between checkpoint and dataset");
  }
  const auto objects = ds.split(split_name == "train" ? Split::train : Split::test);
  std::vector<MetricsReport> reports;
  for (const std::string& v : cfg.eval_variants) reports.push_back(evaluate_model(model, objects, classes, v));
  const std::string report = format_report(reports, cfg.to_text());
  std::cout << report;
  if (!out.empty()) {
    write_text(fs::path(out) / "report.txt", report);
    write_text(fs::path(out) / "metrics.tsv", format_metrics_tsv(reports, cfg.to_text()));
  }
  return kOk;
}

int cmd_ablate(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds, const std::string& out) {
  std::vector<std::string> variants = cfg.eval_variants;
  const AblationResult result = run_ablation(cfg, seeds, variants, &std::cerr);
  const std::string table = format_ablation(result, cfg.to_text());
  std::cout << table;
  if (!out.empty()) write_text(out, table);
  return kOk;
}

int cmd_check(const RunConfig& cfg, std::size_t seeds, std::size_t objects) {
  bool ok = true;
  auto show = [&](const std::vector<CheckOutcome>& outcomes) {
    for (const CheckOutcome& c : outcomes) {
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  (" << c.detail << ")\n";
      ok = ok && c.passed;
    }
  };
  show(gradient_checks(seeds));
  show(invariance_checks(cfg, objects));
  return ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  // Pull out --key=value config overrides before CLI11 sees the arguments.
  const auto keys = RunConfig::keys();
  const std::set<std::string> key_set(keys.begin(), keys.end());
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<std::string> rest;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    const auto eq = arg.find('=');
    if (arg.rfind("--", 0) == 0 && eq != std::string::npos && key_set.count(arg.substr(2, eq - 2))) {
      overrides.emplace_back(arg.substr(2, eq - 2), arg.substr(eq + 1));
    } else {
      rest.push_back(arg);
    }
  }

  CLI::App app{"Part-graph point cloud classifier with spherical kernel convolutions and center voting",
               "skpnet"};
  app.require_subcommand(1);
  app.footer("Every run-config key can be overridden with --key=value (e.g. --train.epochs=10).");

  std::string config_file;
  std::uint64_t seed = 0;
  bool seed_given = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "Run config file (key=value lines)")->check(CLI::ExistingFile);
    sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { seed = s; seed_given = true; },
                                            "Base random seed");
  };

  std::string out, in, format, checkpoint, split_name = "test", seeds_text;
  std::size_t check_seeds = 20, check_objects = 8;

  auto* synth = app.add_subcommand("synth", "Write the synthetic corpus as xyz-normals files");
  add_common(synth);
  synth->add_option("--out", out, "Output directory")->required();

  auto* graph = app.add_subcommand("graph", "Build and export the part graph of one cloud");
  add_common(graph);
  graph->add_option("--in", in, "Input cloud (.off, .ply, .xyz)")->required()->check(CLI::ExistingFile);
  graph->add_option("--out", out, "Output part-graph file")->required();
  graph->add_option("--format", format, "Input format: off, ply, xyz-normals");

  auto* train = app.add_subcommand("train", "Train a model and write checkpoint, loss curve and report");
  add_common(train);
  train->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint under the configured variants");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out, "Directory for report.txt and metrics.tsv");
  eval->add_option("--split", split_name, "Split to evaluate")->check(CLI::IsMember({"train", "test"}));

  auto* ablate = app.add_subcommand("ablate", "Layer x pooling ablation grid on synthetic data");
  add_common(ablate);
  ablate->add_option("--seeds", seeds_text, "Comma-separated seeds (default: --seed, +1, +2)");
  ablate->add_option("--out", out, "Also write the table to this file");

  auto* check = app.add_subcommand("check", "Run the gradient and invariance self-checks");
  add_common(check);
  check->add_option("--grad-seeds", check_seeds, "Random draws per gradient check");
  check->add_option("--objects", check_objects, "Objects per invariance check");

  try {
    std::vector<std::string> reversed(rest.rbegin(), rest.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    std::cout << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  try {
    if (seed_given) overrides.insert(overrides.begin(), {"seed", std::to_string(seed)});
    if (*eval) return cmd_eval(checkpoint, config_file, overrides, out, split_name);
    const RunConfig cfg = build_config(config_file, overrides);
    if (*synth) return cmd_synth(cfg, out);
    if (*graph) return cmd_graph(cfg, in, out, format);
    if (*train) return cmd_train(cfg, out);
    if (*ablate) {
      std::vector<std::uint64_t> seeds;
      if (seeds_text.empty()) {
        seeds = {cfg.seed, cfg.seed + 1, cfg.seed + 2};
      } else {
        std::stringstream ss(seeds_text);
        std::string item;
        while (std::getline(ss, item, ',')) seeds.push_back(std::stoull(item));
      }
      return cmd_ablate(cfg, seeds, out);
    }
    if (*check) return cmd_check(cfg, check_seeds, check_objects);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
