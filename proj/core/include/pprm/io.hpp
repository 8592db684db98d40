#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pprm/harness.hpp"
#include "pprm/monitors.hpp"
#include "pprm/types.hpp"

namespace pprm {

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

// Stream records: one JSON object per line,
//   {"t":1,"labeled":[{"true":0.2,"synth":0.3}],"unlabeled":[0.1],"proxies":[0.4]}
// "proxies" is optional; a labeled pair may carry an optional "proxy".

StepBatch parse_stream_record(std::string_view line);
std::string serialize_stream_record(const StepBatch& batch);

/// Reads a whole stream. Blank lines are skipped. Errors name the 1-based
/// line number. `t` must increase strictly.
std::vector<StepBatch> read_stream(std::istream& in);
std::vector<StepBatch> read_stream_file(const std::filesystem::path& path);
void write_stream(std::ostream& out, std::span<const StepBatch> batches);

// Traces.

inline constexpr std::string_view kTraceHeader =
    "t,step_estimate,running_estimate,lower_bound,upper_bound_source,eta_t,v_t,alarm";

/// One CSV row; the lower bound is clipped at 0 for display.
std::string format_trace_row(const BoundTrace& row);
void write_trace_csv(std::ostream& out, std::span<const BoundTrace> rows);

// Calibration files.

using Calibration = std::variant<SourceCalibration, UrmCalibration>;

std::string calibration_to_json(const Calibration& calib);
Calibration calibration_from_json(std::string_view text);

std::string_view source_bound_method_name(SourceBoundMethod method);
std::optional<SourceBoundMethod> parse_source_bound_method(std::string_view name);

// Summaries.

/// {"steps":N,"alarm":bool,"alarm_time":k|null,"censored":bool}
std::string monitor_summary_json(std::span<const BoundTrace> trace);

std::string experiment_summary_json(const ExperimentSummary& summary);
std::string eta_mode_table_json(std::span<const EtaModeRow> rows);

}  // namespace pprm
