#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qgnn/attacks.hpp"
#include "qgnn/train.hpp"
#include "qgnn/wl.hpp"

namespace qgnn {

/// %.17g, the round-trip representation used in every CSV and report.
std::string format_real(double value);

/// Structured report (JSON, "format_version": 1).
std::string attack_report_json(const AttackReport& report);
AttackReport attack_report_from_json(const std::string& text);

/// flip_count,metric_kind,value
std::string metric_curve_csv(const AttackReport& report);

/// Replayable flip log: header line then one flip per line,
/// "run tensor element bit code_before code_after objective_before objective_after".
std::string flip_log_text(const std::vector<FlipRecord>& flips);
std::vector<FlipRecord> parse_flip_log(const std::string& text);

/// attack,attack_runs,total_bit_flips,metric_kind,clean_metric,post_metric,random_output,stalled
std::string escalation_summary_csv(const EscalationResult& result);

/// epoch,train_loss,train_<metric>,valid_<metric>
std::string history_csv(const std::vector<EpochRecord>& history, MetricKind metric);

/// k,class,mean_jaccard,pairs_counted
std::string glwl_csv(const std::vector<GlwlEntry>& rows);

/// task,metric_kind,value
std::string eval_csv(const EvalResult& result);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace qgnn
