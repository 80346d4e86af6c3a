#include "config.hpp"

#include <set>

#include <yaml-cpp/yaml.h>

#include "qgnn/rng.hpp"
#include "qgnn/tu_io.hpp"

namespace qgnn::cli {

namespace {

constexpr int kConfigVersion = 1;

enum SeedTag : std::uint64_t { kData = 1, kSplit = 2, kInit = 3, kTrain = 4, kAttack = 5 };

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  if (!node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + "." + key + ": wrong value type");
  }
}

void read_data(const YAML::Node& n, DataSource& d) {
  check_keys(n, "data", {"tu_dir", "tu_name", "family", "per_class", "sizes"});
  if (n["tu_dir"]) {
    d.tu_dir = n["tu_dir"].as<std::string>();
    if (!n["tu_name"]) throw ConfigError("data.tu_name is required with data.tu_dir");
    d.tu_name = n["tu_name"].as<std::string>();
  }
  if (n["family"]) d.family = parse_task_family(n["family"].as<std::string>());
  read(n, "per_class", d.per_class, "data");
  if (n["sizes"]) d.sizes = parse_sizes(n["sizes"].as<std::string>());
}

void read_model(const YAML::Node& n, ModelConfig& m) {
  check_keys(n, "model", {"architecture", "num_layers", "hidden_dim", "mlp_depth", "epsilon", "virtual_node"});
  if (n["architecture"]) m.architecture = parse_architecture(n["architecture"].as<std::string>());
  read(n, "num_layers", m.num_layers, "model");
  read(n, "hidden_dim", m.hidden_dim, "model");
  read(n, "mlp_depth", m.mlp_depth, "model");
  read(n, "epsilon", m.epsilon, "model");
  read(n, "virtual_node", m.virtual_node, "model");
}

void read_train(const YAML::Node& n, TrainConfig& t) {
  check_keys(n, "train", {"epochs", "lr", "batch_size", "beta1", "beta2", "adam_eps"});
  read(n, "epochs", t.epochs, "train");
  read(n, "lr", t.lr, "train");
  read(n, "batch_size", t.batch_size, "train");
  read(n, "beta1", t.beta1, "train");
  read(n, "beta2", t.beta2, "train");
  read(n, "adam_eps", t.adam_eps, "train");
}

AttackConfig read_attack(const YAML::Node& n, std::size_t i) {
  const std::string where = "attack.attacks[" + std::to_string(i) + "]";
  check_keys(n, where, {"kind", "loss", "candidates_per_layer", "max_combination_size", "batch_size", "pool_fraction",
                        "resample_batch", "max_total_flips", "stop_on_random_output"});
  if (!n["kind"]) throw ConfigError(where + ".kind is required");
  AttackConfig a;
  a.attack = parse_attack(n["kind"].as<std::string>());
  if (a.attack == AttackKind::pbfa) a.loss = LossKind::bce_masked;
  if (n["loss"]) a.loss = parse_loss(n["loss"].as<std::string>());
  read(n, "candidates_per_layer", a.candidates_per_layer, where);
  read(n, "max_combination_size", a.max_combination_size, where);
  read(n, "batch_size", a.batch_size, where);
  read(n, "pool_fraction", a.pool_fraction, where);
  read(n, "resample_batch", a.resample_batch, where);
  read(n, "max_total_flips", a.max_total_flips, where);
  read(n, "stop_on_random_output", a.stop_on_random_output, where);
  return a;
}

}  // namespace

void ExperimentConfig::apply_seed(std::uint64_t s) {
  seed = s;
  split.seed = derive_seed(s, kSplit);
  model.seed = derive_seed(s, kInit);
  train.seed = derive_seed(s, kTrain);
  for (std::size_t i = 0; i < attacks.size(); ++i) attacks[i].seed = derive_seed(derive_seed(s, kAttack), i);
}

SizeRange parse_sizes(const std::string& text) {
  const auto colon = text.find(':');
  SizeRange r;
  try {
    std::size_t used = 0;
    if (colon == std::string::npos) throw ConfigError("");
    r.lo = std::stoi(text.substr(0, colon), &used);
    if (used != colon) throw ConfigError("");
    const auto rest = text.substr(colon + 1);
    r.hi = std::stoi(rest, &used);
    if (used != rest.size()) throw ConfigError("");
  } catch (const std::exception&) {
    throw ConfigError("sizes must look like LO:HI, got '" + text + "'");
  }
  return r;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot read config '" + path.string() + "': " + e.what());
  }
  check_keys(root, "config", {"version", "seed", "output_dir", "data", "split", "model", "train", "metric", "attack",
                              "wl_stats"});
  if (!root["version"] || root["version"].as<int>() != kConfigVersion) {
    throw ConfigError("config version must be " + std::to_string(kConfigVersion));
  }
  ExperimentConfig c;
  std::uint64_t seed = 0;
  try {
    read(root, "seed", seed, "config");
    if (root["output_dir"]) c.output_dir = root["output_dir"].as<std::string>();
    if (root["data"]) read_data(root["data"], c.data);
    if (root["split"]) {
      const auto& s = root["split"];
      check_keys(s, "split", {"train", "valid", "test"});
      read(s, "train", c.split.fractions[0], "split");
      read(s, "valid", c.split.fractions[1], "split");
      read(s, "test", c.split.fractions[2], "split");
    }
    if (root["model"]) read_model(root["model"], c.model);
    if (root["train"]) read_train(root["train"], c.train);
    if (root["metric"]) c.metric = parse_metric(root["metric"].as<std::string>());
    c.train.metric = c.metric;
    if (root["attack"]) {
      const auto& a = root["attack"];
      check_keys(a, "attack", {"initial_runs", "max_runs", "attacks"});
      read(a, "initial_runs", c.escalation.initial_runs, "attack");
      read(a, "max_runs", c.escalation.max_runs, "attack");
      if (a["attacks"]) {
        if (!a["attacks"].IsSequence()) throw ConfigError("attack.attacks: expected a list");
        std::set<AttackKind> seen;
        for (std::size_t i = 0; i < a["attacks"].size(); ++i) {
          c.attacks.push_back(read_attack(a["attacks"][i], i));
          c.attacks.back().validate();
          if (!seen.insert(c.attacks.back().attack).second) throw ConfigError("attack kinds must be distinct");
        }
      }
    }
    if (root["wl_stats"]) {
      const auto& w = root["wl_stats"];
      check_keys(w, "wl_stats", {"k_max", "sample"});
      read(w, "k_max", c.wl_k_max, "wl_stats");
      read(w, "sample", c.wl_sample, "wl_stats");
    }
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.apply_seed(seed);
  return c;
}

Dataset load_data(const DataSource& source, std::uint64_t seed) {
  if (source.tu_dir) return load_tu_dataset(*source.tu_dir, source.tu_name);
  return gen_wl_task(source.family, source.per_class, source.sizes, derive_seed(seed, kData));
}

}  // namespace qgnn::cli
