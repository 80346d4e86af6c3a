#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "config.hpp"
#include "qgnn/errors.hpp"
#include "qgnn/report.hpp"
#include "qgnn/tu_io.hpp"
#include "qgnn/wl.hpp"

using namespace qgnn;
using namespace qgnn::cli;

namespace {

enum Exit { kOk = 0, kUsage = 2, kTraining = 3, kEvaluation = 4, kCap = 5 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

std::filesystem::path output_dir(const Common& c, const std::filesystem::path& fallback) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("QBFA_OUT_DIR"); env && *env) return env;
  return fallback;
}

ExperimentConfig experiment(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required");
  auto cfg = load_config(c.config);
  if (c.seed) cfg.apply_seed(*c.seed);
  cfg.output_dir = output_dir(c, cfg.output_dir);
  return cfg;
}

// Timestamps go here so every other output stays byte-reproducible.
void sidecar_log(const std::filesystem::path& dir, const std::string& command) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "run.log", std::ios::app) << stamp << " " << command << "\n";
}

Splits experiment_splits(const ExperimentConfig& cfg) {
  return split_dataset(load_data(cfg.data, cfg.seed), cfg.split);
}

void check_dims(const ModelParams& m, const ExperimentConfig& cfg, const Dataset& d) {
  const auto& mc = m.config;
  if (mc.architecture != cfg.model.architecture || mc.num_layers != cfg.model.num_layers ||
      mc.hidden_dim != cfg.model.hidden_dim || mc.mlp_depth != cfg.model.mlp_depth ||
      mc.virtual_node != cfg.model.virtual_node) {
    throw ConfigError("checkpoint architecture does not match the config");
  }
  if (mc.output_dim != d.output_dim() || mc.input_dim < d.label_alphabet_size) {
    throw ConfigError("checkpoint input/output widths do not match the dataset");
  }
}

int cmd_gen_data(const Common& c, const std::string& family, int per_class, const std::string& sizes,
                 const std::string& name) {
  const auto dir = output_dir(c, "data");
  const auto ds = gen_wl_task(parse_task_family(family), per_class, parse_sizes(sizes), c.seed.value_or(0));
  write_tu_dataset(ds, dir, name);
  std::cout << "wrote " << ds.size() << " graphs to " << dir.string() << "\n";
  return kOk;
}

int cmd_train(const Common& c) {
  const auto cfg = experiment(c);
  const auto s = experiment_splits(cfg);
  auto mc = cfg.model;
  mc.input_dim = s.train.label_alphabet_size;
  mc.output_dim = s.train.output_dim();
  const auto result = train_quantized(init_model(mc), s.train, s.valid, cfg.train);
  save_checkpoint(result.model, cfg.output_dir / "model.ckpt");
  write_text_file(cfg.output_dir / "history.csv", history_csv(result.history, cfg.metric));
  const auto test = evaluate_model(result.model, s.test, cfg.metric);
  write_text_file(cfg.output_dir / "clean_eval.csv", eval_csv(test));
  sidecar_log(cfg.output_dir, "train");
  std::cout << "clean test " << to_string(cfg.metric) << " " << format_real(test.value) << "\n";
  return kOk;
}

int cmd_attack(const Common& c, const std::string& checkpoint, const std::string& replay) {
  if (checkpoint.empty()) throw ConfigError("--checkpoint is required");
  if (!std::filesystem::exists(checkpoint)) throw ConfigError("checkpoint '" + checkpoint + "' not found");
  const auto clean = load_checkpoint(checkpoint);

  if (!replay.empty()) {
    const auto dir = output_dir(c, "out");
    auto model = clean;
    const auto flips = parse_flip_log(read_text_file(replay));
    apply_flip_log(model, flips);
    save_checkpoint(model, dir / "replayed.ckpt");
    std::cout << "replayed " << flips.size() << " flips\n";
    return kOk;
  }

  const auto cfg = experiment(c);
  if (cfg.attacks.size() < 2) throw ConfigError("attack.attacks must list at least two attacks");
  const auto s = experiment_splits(cfg);
  check_dims(clean, cfg, s.train);
  const AttackContext ctx{&s.train, &s.test, cfg.metric};
  const auto res = escalation_protocol(clean, ctx, cfg.attacks, cfg.escalation);

  for (const auto& r : res.reports) {
    const std::string stem = to_string(r.attack);
    write_text_file(cfg.output_dir / (stem + ".report.json"), attack_report_json(r));
    write_text_file(cfg.output_dir / (stem + ".curve.csv"), metric_curve_csv(r));
    write_text_file(cfg.output_dir / (stem + ".flips.log"), flip_log_text(r.flips));
    auto attacked = clean;
    apply_flip_log(attacked, r.flips);
    save_checkpoint(attacked, cfg.output_dir / (stem + ".ckpt"));
  }
  write_text_file(cfg.output_dir / "summary.csv", escalation_summary_csv(res));
  sidecar_log(cfg.output_dir, "attack");
  std::cout << escalation_summary_csv(res);
  if (!res.reached_random_output) {
    std::cerr << "escalation cap of " << cfg.escalation.max_runs << " runs reached without random output\n";
    return kCap;
  }
  return kOk;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& data_dir, const std::string& name,
             const std::string& metric) {
  if (checkpoint.empty()) throw ConfigError("--checkpoint is required");
  if (!std::filesystem::exists(checkpoint)) throw ConfigError("checkpoint '" + checkpoint + "' not found");
  const auto model = load_checkpoint(checkpoint);
  Dataset data;
  MetricKind kind = MetricKind::acc;
  std::filesystem::path dir;
  if (!data_dir.empty()) {
    data = load_tu_dataset(data_dir, name);
    dir = output_dir(c, "out");
  } else {
    const auto cfg = experiment(c);
    data = experiment_splits(cfg).test;
    kind = cfg.metric;
    dir = cfg.output_dir;
  }
  if (!metric.empty()) kind = parse_metric(metric);
  const auto r = evaluate_model(model, data, kind);
  write_text_file(dir / "eval.csv", eval_csv(r));
  std::cout << to_string(kind) << " " << format_real(r.value) << "\n";
  return kOk;
}

int cmd_wl_stats(const Common& c, const std::string& data_dir, const std::string& name, std::optional<int> k_max,
                 std::optional<std::size_t> sample) {
  Dataset data;
  std::filesystem::path dir;
  int k = 7;
  std::size_t n = 1000;
  std::uint64_t seed = c.seed.value_or(0);
  if (!data_dir.empty()) {
    data = load_tu_dataset(data_dir, name);
    dir = output_dir(c, "out");
  } else {
    const auto cfg = experiment(c);
    data = load_data(cfg.data, cfg.seed);
    dir = cfg.output_dir;
    k = cfg.wl_k_max;
    n = cfg.wl_sample;
    seed = cfg.seed;
  }
  const auto rows = epsilon_glwl_statistic(data, k_max.value_or(k), sample.value_or(n), seed);
  write_text_file(dir / "wl_stats.csv", glwl_csv(rows));
  std::cout << glwl_csv(rows);
  return kOk;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "YAML experiment config");
  sub->add_option("--seed", c.seed, "global seed (overrides the config)");
  sub->add_option("--out", c.out, "output directory (overrides QBFA_OUT_DIR and the config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bit-flip attacks on quantized graph neural networks"};
  app.require_subcommand(1);

  Common common;
  std::string family = "cycles-vs-paths", sizes = "5:12", name = "SYN";
  int per_class = 200;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic structural dataset in TU layout");
  add_common(gen, common);
  gen->add_option("--family", family, "cycles-vs-paths | regular-pairs | tree-depth");
  gen->add_option("--per-class", per_class, "graphs per class");
  gen->add_option("--sizes", sizes, "node-count range LO:HI");
  gen->add_option("--name", name, "dataset file prefix");

  auto* train = app.add_subcommand("train", "train a quantized model");
  add_common(train, common);

  std::string checkpoint, replay, data_dir, metric;
  auto* attack = app.add_subcommand("attack", "run the escalation protocol or replay a flip log");
  add_common(attack, common);
  attack->add_option("--checkpoint", checkpoint, "clean model checkpoint");
  attack->add_option("--replay", replay, "flip log to re-apply to the checkpoint");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "model checkpoint");
  eval->add_option("--data", data_dir, "TU dataset directory (default: test split of --config)");
  eval->add_option("--name", name, "TU dataset prefix");
  eval->add_option("--metric", metric, "auroc | ap | acc");

  std::optional<int> k_max;
  std::optional<std::size_t> sample;
  auto* wl = app.add_subcommand("wl-stats", "within-class WL color-multiset Jaccard distances");
  add_common(wl, common);
  wl->add_option("--data", data_dir, "TU dataset directory (default: dataset of --config)");
  wl->add_option("--name", name, "TU dataset prefix");
  wl->add_option("--k-max", k_max, "largest WL round");
  wl->add_option("--sample", sample, "graphs sampled");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen) return cmd_gen_data(common, family, per_class, sizes, name);
    if (*train) return cmd_train(common);
    if (*attack) return cmd_attack(common, checkpoint, replay);
    if (*eval) return cmd_eval(common, checkpoint, data_dir, name, metric);
    if (*wl) return cmd_wl_stats(common, data_dir, name, k_max, sample);
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kTraining;
  } catch (const MetricUndefined& e) {
    std::cerr << "evaluation failed: " << e.what() << "\n";
    return kEvaluation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
