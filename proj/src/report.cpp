#include "qgnn/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qgnn/errors.hpp"

namespace qgnn {

using nlohmann::json;

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string attack_report_json(const AttackReport& r) {
  json j;
  j["format_version"] = 1;
  j["attack"] = to_string(r.attack);
  j["attack_runs"] = r.attack_runs;
  j["runs_completed"] = r.runs_completed;
  j["stalled"] = r.stalled;
  j["metric_kind"] = to_string(r.metric_kind);
  j["clean_metric"] = r.clean_metric;
  j["final_metric"] = r.final_metric;
  j["random_output"] = r.random_output;
  j["total_bit_flips"] = r.total_bit_flips;
  auto& flips = j["flips"] = json::array();
  for (const auto& f : r.flips) {
    flips.push_back({{"run", f.run},
                     {"tensor", f.tensor},
                     {"element", f.element},
                     {"bit", f.bit},
                     {"code_before", f.code_before},
                     {"code_after", f.code_after},
                     {"objective_before", f.objective_before},
                     {"objective_after", f.objective_after}});
  }
  auto& curve = j["metric_curve"] = json::array();
  for (const auto& p : r.metric_curve) curve.push_back({{"flip_count", p.flip_count}, {"metric", p.metric}});
  j["per_tensor_flip_counts"] = r.per_tensor_flip_counts;
  auto& pairs = j["selected_pairs"] = json::array();
  for (const auto& p : r.selected_pairs) {
    pairs.push_back({{"run", p.run},
                     {"batch_a", p.batch_a},
                     {"batch_b", p.batch_b},
                     {"objective", p.objective},
                     {"graphs_a", p.graphs_a},
                     {"graphs_b", p.graphs_b}});
  }
  return j.dump(2) + "\n";
}

AttackReport attack_report_from_json(const std::string& text) {
  AttackReport r;
  try {
    const auto j = json::parse(text);
    if (j.at("format_version").get<int>() != 1) throw FormatError("unsupported report format_version");
    r.attack = parse_attack(j.at("attack").get<std::string>());
    r.attack_runs = j.at("attack_runs").get<int>();
    r.runs_completed = j.at("runs_completed").get<int>();
    r.stalled = j.at("stalled").get<bool>();
    r.metric_kind = parse_metric(j.at("metric_kind").get<std::string>());
    r.clean_metric = j.at("clean_metric").get<double>();
    r.final_metric = j.at("final_metric").get<double>();
    r.random_output = j.at("random_output").get<bool>();
    r.total_bit_flips = j.at("total_bit_flips").get<std::size_t>();
    for (const auto& f : j.at("flips")) {
      r.flips.push_back({f.at("tensor").get<std::string>(), f.at("element").get<std::size_t>(), f.at("bit").get<int>(),
                         f.at("code_before").get<int>(), f.at("code_after").get<int>(),
                         f.at("objective_before").get<double>(), f.at("objective_after").get<double>(),
                         f.at("run").get<int>()});
    }
    for (const auto& p : j.at("metric_curve")) {
      r.metric_curve.push_back({p.at("flip_count").get<std::size_t>(), p.at("metric").get<double>()});
    }
    r.per_tensor_flip_counts = j.at("per_tensor_flip_counts").get<std::map<std::string, std::size_t>>();
    for (const auto& p : j.at("selected_pairs")) {
      r.selected_pairs.push_back({p.at("run").get<int>(), p.at("batch_a").get<std::size_t>(),
                                  p.at("batch_b").get<std::size_t>(), p.at("objective").get<double>(),
                                  p.at("graphs_a").get<std::vector<std::size_t>>(),
                                  p.at("graphs_b").get<std::vector<std::size_t>>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed attack report: ") + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(std::string("malformed attack report: ") + e.what());
  }
  return r;
}

std::string metric_curve_csv(const AttackReport& report) {
  std::string out = "flip_count,metric_kind,value\n";
  for (const auto& p : report.metric_curve) {
    out += std::to_string(p.flip_count) + "," + to_string(report.metric_kind) + "," + format_real(p.metric) + "\n";
  }
  return out;
}

namespace {
constexpr const char* kFlipLogHeader =
    "# qgnn flip log v1: run tensor element bit code_before code_after objective_before objective_after";
}

std::string flip_log_text(const std::vector<FlipRecord>& flips) {
  std::string out = std::string(kFlipLogHeader) + "\n";
  for (const auto& f : flips) {
    out += std::to_string(f.run) + " " + f.tensor + " " + std::to_string(f.element) + " " + std::to_string(f.bit) + " " +
           std::to_string(f.code_before) + " " + std::to_string(f.code_after) + " " + format_real(f.objective_before) +
           " " + format_real(f.objective_after) + "\n";
  }
  return out;
}

std::vector<FlipRecord> parse_flip_log(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kFlipLogHeader) throw FormatError("flip log: missing or unknown header line");
  std::vector<FlipRecord> out;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    FlipRecord f;
    std::string ob, oa, extra;
    if (!(ls >> f.run >> f.tensor >> f.element >> f.bit >> f.code_before >> f.code_after >> ob >> oa) || (ls >> extra)) {
      throw FormatError("flip log line " + std::to_string(lineno) + ": expected 8 fields");
    }
    char* end = nullptr;
    f.objective_before = std::strtod(ob.c_str(), &end);
    if (end != ob.c_str() + ob.size()) throw FormatError("flip log line " + std::to_string(lineno) + ": bad real");
    f.objective_after = std::strtod(oa.c_str(), &end);
    if (end != oa.c_str() + oa.size()) throw FormatError("flip log line " + std::to_string(lineno) + ": bad real");
    out.push_back(std::move(f));
  }
  return out;
}

std::string escalation_summary_csv(const EscalationResult& result) {
  std::string out = "attack,attack_runs,total_bit_flips,metric_kind,clean_metric,post_metric,random_output,stalled\n";
  for (const auto& r : result.reports) {
    out += std::string(to_string(r.attack)) + "," + std::to_string(r.attack_runs) + "," +
           std::to_string(r.total_bit_flips) + "," + to_string(r.metric_kind) + "," + format_real(r.clean_metric) + "," +
           format_real(r.final_metric) + "," + (r.random_output ? "1" : "0") + "," + (r.stalled ? "1" : "0") + "\n";
  }
  return out;
}

std::string history_csv(const std::vector<EpochRecord>& history, MetricKind metric) {
  std::string out = "epoch,train_loss,train_" + std::string(to_string(metric)) + ",valid_" + to_string(metric) + "\n";
  for (const auto& h : history) {
    out += std::to_string(h.epoch) + "," + format_real(h.train_loss) + "," + format_real(h.train_metric) + "," +
           format_real(h.valid_metric) + "\n";
  }
  return out;
}

std::string glwl_csv(const std::vector<GlwlEntry>& rows) {
  std::string out = "k,class,mean_jaccard,pairs_counted\n";
  for (const auto& r : rows) {
    out += std::to_string(r.k) + "," + std::to_string(r.cls) + "," + format_real(r.mean_jaccard) + "," +
           std::to_string(r.pairs_counted) + "\n";
  }
  return out;
}

std::string eval_csv(const EvalResult& result) {
  std::string out = "task,metric_kind,value\n";
  for (std::size_t i = 0; i < result.per_task_values.size(); ++i) {
    out += std::to_string(result.evaluated_tasks[i]) + "," + to_string(result.metric_kind) + "," +
           format_real(result.per_task_values[i]) + "\n";
  }
  out += std::string("mean,") + to_string(result.metric_kind) + "," + format_real(result.value) + "\n";
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw FormatError("write to '" + path.string() + "' failed");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace qgnn
