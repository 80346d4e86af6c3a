#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qgnn/attacks.hpp"
#include "qgnn/errors.hpp"
#include "qgnn/model.hpp"
#include "qgnn/split.hpp"
#include "qgnn/synthetic.hpp"
#include "qgnn/train.hpp"

namespace qgnn::cli {

// Raised for malformed or inconsistent configuration; maps to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct DataSource {
  // TU directory when set, synthetic generator otherwise.
  std::optional<std::filesystem::path> tu_dir;
  std::string tu_name;
  TaskFamily family = TaskFamily::cycles_vs_paths;
  int per_class = 200;
  SizeRange sizes{5, 12};
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  DataSource data;
  SplitSpec split;
  ModelConfig model;
  TrainConfig train;
  MetricKind metric = MetricKind::acc;
  EscalationConfig escalation;
  std::vector<AttackConfig> attacks;
  int wl_k_max = 7;
  std::size_t wl_sample = 1000;

  // Sub-seeds follow the global seed so one override reseeds everything.
  void apply_seed(std::uint64_t s);
};

ExperimentConfig load_config(const std::filesystem::path& path);

SizeRange parse_sizes(const std::string& text);

Dataset load_data(const DataSource& source, std::uint64_t seed);

}  // namespace qgnn::cli
