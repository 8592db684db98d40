#include "pprm/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "pprm/error.hpp"

namespace pprm {

namespace {

using nlohmann::json;

void append_double(std::string& out, double x) {
  if (!std::isfinite(x)) {
    out += "null";
    return;
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, res.ptr);
}

void append_array(std::string& out, std::span<const double> xs) {
  out += '[';
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    append_double(out, xs[i]);
  }
  out += ']';
}

void append_key(std::string& out, std::string_view key) {
  out += '"';
  out += key;
  out += "\":";
}

json parse_object(std::string_view text, const char* what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(std::string(what) + " must be a JSON object");
  return j;
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    std::string_view context) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) {
      throw ParseError("unknown key \"" + key + "\" in " + std::string(context));
    }
  }
}

double number(const json& j, std::string_view key) {
  if (!j.is_number()) throw ParseError("\"" + std::string(key) + "\" must be a number");
  return j.get<double>();
}

const json& field(const json& obj, std::string_view key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("missing key \"" + std::string(key) + "\"");
  return *it;
}

std::vector<double> number_array(const json& j, std::string_view key) {
  if (!j.is_array()) throw ParseError("\"" + std::string(key) + "\" must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(number(x, key));
  return out;
}

std::size_t count(const json& j, std::string_view key) {
  if (!j.is_number_unsigned()) {
    throw ParseError("\"" + std::string(key) + "\" must be a nonnegative integer");
  }
  return j.get<std::size_t>();
}

// Re-raises `e` with a line prefix, keeping its type.
[[noreturn]] void rethrow_with_line(const Error& e, std::size_t line) {
  const std::string msg = "line " + std::to_string(line) + ": " + e.what();
  if (dynamic_cast<const RangeError*>(&e)) throw RangeError(msg);
  if (dynamic_cast<const SequencingError*>(&e)) throw SequencingError(msg);
  if (dynamic_cast<const PreconditionError*>(&e)) throw PreconditionError(msg);
  throw ParseError(msg);
}

}  // namespace

std::string format_double(double x) {
  std::string out;
  append_double(out, x);
  return out;
}

StepBatch parse_stream_record(std::string_view line) {
  const json j = parse_object(line, "stream record");
  reject_unknown(j, {"t", "labeled", "unlabeled", "proxies"}, "stream record");
  StepBatch batch;
  const json& t = field(j, "t");
  if (!t.is_number_integer()) throw ParseError("\"t\" must be an integer");
  batch.t = t.get<std::int64_t>();

  const json& labeled = field(j, "labeled");
  if (!labeled.is_array()) throw ParseError("\"labeled\" must be an array");
  std::size_t with_proxy = 0;
  for (const auto& pair : labeled) {
    if (!pair.is_object()) throw ParseError("labeled entries must be objects");
    reject_unknown(pair, {"true", "synth", "proxy"}, "labeled pair");
    batch.labeled.push_back({number(field(pair, "true"), "true"),
                             number(field(pair, "synth"), "synth")});
    if (const auto it = pair.find("proxy"); it != pair.end()) {
      batch.labeled_proxies.push_back(number(*it, "proxy"));
      ++with_proxy;
    }
  }
  if (with_proxy != 0 && with_proxy != batch.labeled.size()) {
    throw ParseError("either every labeled pair carries a proxy or none does");
  }
  batch.unlabeled_synth = number_array(field(j, "unlabeled"), "unlabeled");
  if (const auto it = j.find("proxies"); it != j.end()) {
    batch.proxies = number_array(*it, "proxies");
  }
  validate_batch(batch);
  return batch;
}

std::string serialize_stream_record(const StepBatch& batch) {
  std::string out = "{\"t\":";
  out += std::to_string(batch.t);
  out += ",\"labeled\":[";
  for (std::size_t i = 0; i < batch.labeled.size(); ++i) {
    if (i) out += ',';
    out += "{\"true\":";
    append_double(out, batch.labeled[i].true_loss);
    out += ",\"synth\":";
    append_double(out, batch.labeled[i].synth_loss);
    if (i < batch.labeled_proxies.size()) {
      out += ",\"proxy\":";
      append_double(out, batch.labeled_proxies[i]);
    }
    out += '}';
  }
  out += "],\"unlabeled\":";
  append_array(out, batch.unlabeled_synth);
  if (!batch.proxies.empty()) {
    out += ",\"proxies\":";
    append_array(out, batch.proxies);
  }
  out += '}';
  return out;
}

std::vector<StepBatch> read_stream(std::istream& in) {
  std::vector<StepBatch> batches;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      StepBatch batch = parse_stream_record(line);
      if (!batches.empty() && batch.t <= batches.back().t) {
        throw SequencingError("t must increase strictly (got " + std::to_string(batch.t) +
                              " after " + std::to_string(batches.back().t) + ")");
      }
      batches.push_back(std::move(batch));
    } catch (const Error& e) {
      rethrow_with_line(e, number);
    }
  }
  return batches;
}

std::vector<StepBatch> read_stream_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return read_stream(in);
}

void write_stream(std::ostream& out, std::span<const StepBatch> batches) {
  for (const auto& b : batches) out << serialize_stream_record(b) << '\n';
}

std::string format_trace_row(const BoundTrace& row) {
  std::string out = std::to_string(row.t);
  for (double x : {row.step_estimate, row.running_estimate, std::max(row.lower_bound, 0.0),
                   row.upper_bound_source, row.eta_t, row.v_t}) {
    out += ',';
    append_double(out, x);
  }
  out += row.alarm ? ",1" : ",0";
  return out;
}

void write_trace_csv(std::ostream& out, std::span<const BoundTrace> rows) {
  out << kTraceHeader << '\n';
  for (const auto& row : rows) out << format_trace_row(row) << '\n';
}

std::string_view source_bound_method_name(SourceBoundMethod method) {
  return method == SourceBoundMethod::betting_ppi ? "betting_ppi" : "hoeffding_labeled_only";
}

std::optional<SourceBoundMethod> parse_source_bound_method(std::string_view name) {
  if (name == "betting_ppi") return SourceBoundMethod::betting_ppi;
  if (name == "hoeffding_labeled_only") return SourceBoundMethod::hoeffding_labeled_only;
  return std::nullopt;
}

std::string calibration_to_json(const Calibration& calib) {
  std::string out = "{";
  auto put = [&out](std::string_view key, double x) {
    out += ',';
    append_key(out, key);
    append_double(out, x);
  };
  if (const auto* c = std::get_if<SourceCalibration>(&calib)) {
    out += "\"method\":\"";
    out += source_bound_method_name(c->method);
    out += "\",\"n0\":" + std::to_string(c->n0);
    out += ",\"N0\":" + std::to_string(c->N0);
    put("eta0", c->eta0);
    put("estimate", c->estimate);
    put("upper_bound", c->upper_bound);
    out += ",\"degenerate_blocks\":";
    out += c->degenerate_blocks ? "true" : "false";
  } else {
    const auto& u = std::get<UrmCalibration>(calib);
    out += "\"method\":\"urm\",\"n0\":" + std::to_string(u.n0);
    put("tau", u.tau);
    put("beta0", u.beta0);
    put("f1", u.f1);
    put("pfp0", u.pfp0);
    put("pfp0_ucb", u.pfp0_ucb);
    put("upper_bound", u.source_upper_bound);
  }
  out += "}\n";
  return out;
}

Calibration calibration_from_json(std::string_view text) {
  const json j = parse_object(text, "calibration");
  const json& method = field(j, "method");
  if (!method.is_string()) throw ParseError("\"method\" must be a string");
  const std::string name = method.get<std::string>();
  if (name == "urm") {
    reject_unknown(j, {"method", "n0", "tau", "beta0", "f1", "pfp0", "pfp0_ucb", "upper_bound"},
                   "calibration");
    UrmCalibration u;
    u.n0 = count(field(j, "n0"), "n0");
    u.tau = number(field(j, "tau"), "tau");
    u.beta0 = number(field(j, "beta0"), "beta0");
    u.f1 = number(field(j, "f1"), "f1");
    u.pfp0 = number(field(j, "pfp0"), "pfp0");
    u.pfp0_ucb = number(field(j, "pfp0_ucb"), "pfp0_ucb");
    u.source_upper_bound = number(field(j, "upper_bound"), "upper_bound");
    return u;
  }
  const auto parsed = parse_source_bound_method(name);
  if (!parsed) throw ParseError("unknown calibration method \"" + name + "\"");
  reject_unknown(j, {"method", "n0", "N0", "eta0", "estimate", "upper_bound", "degenerate_blocks"},
                 "calibration");
  SourceCalibration c;
  c.method = *parsed;
  c.n0 = count(field(j, "n0"), "n0");
  c.N0 = count(field(j, "N0"), "N0");
  c.eta0 = number(field(j, "eta0"), "eta0");
  c.estimate = number(field(j, "estimate"), "estimate");
  c.upper_bound = number(field(j, "upper_bound"), "upper_bound");
  if (const auto it = j.find("degenerate_blocks"); it != j.end()) {
    if (!it->is_boolean()) throw ParseError("\"degenerate_blocks\" must be a boolean");
    c.degenerate_blocks = it->get<bool>();
  }
  return c;
}

std::string monitor_summary_json(std::span<const BoundTrace> trace) {
  const auto alarm = first_alarm_time(trace);
  std::string out = "{\"steps\":" + std::to_string(trace.size());
  out += ",\"alarm\":";
  out += alarm ? "true" : "false";
  out += ",\"alarm_time\":";
  out += alarm ? std::to_string(*alarm) : "null";
  out += ",\"censored\":";
  out += alarm ? "false" : "true";
  out += "}\n";
  return out;
}

std::string experiment_summary_json(const ExperimentSummary& summary) {
  std::string out = "{\"horizon\":" + std::to_string(summary.horizon);
  out += ",\"replications\":" + std::to_string(summary.replications);
  out += ",\"base_seed\":" + std::to_string(summary.base_seed);
  out += ",\"methods\":[";
  for (std::size_t i = 0; i < summary.methods.size(); ++i) {
    const MethodSummary& m = summary.methods[i];
    if (i) out += ',';
    out += "{\"method\":\"";
    out += method_name(m.method);
    out += "\",\"replications\":" + std::to_string(m.replications);
    out += ",\"pfa\":";
    append_double(out, m.pfa);
    out += ",\"censored\":" + std::to_string(m.censored);
    out += ",\"mean_alarm_time\":";
    if (m.mean_alarm_time) {
      append_double(out, *m.mean_alarm_time);
    } else {
      out += "null";
    }
    out += ",\"min_alarm_time\":";
    append_double(out, m.min_alarm_time);
    out += ",\"max_alarm_time\":";
    append_double(out, m.max_alarm_time);
    out += ",\"mean_alarm_time_censored\":";
    append_double(out, m.mean_alarm_time_censored);
    out += ",\"se_alarm_time_censored\":";
    append_double(out, m.se_alarm_time_censored);
    out += ",\"coverage_violations\":" + std::to_string(m.coverage_violations);
    out += ",\"median_eta\":";
    append_double(out, m.median_eta);
    out += ",\"alarm_times\":[";
    for (std::size_t r = 0; r < m.alarm_times.size(); ++r) {
      if (r) out += ',';
      out += m.alarm_times[r] ? std::to_string(*m.alarm_times[r]) : "null";
    }
    out += "],\"mean_lower_bound\":";
    append_array(out, m.mean_lower_bound);
    out += ",\"mean_running_estimate\":";
    append_array(out, m.mean_running_estimate);
    out += '}';
  }
  out += "]}\n";
  return out;
}

std::string eta_mode_table_json(std::span<const EtaModeRow> rows) {
  std::string out = "[";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const EtaModeRow& r = rows[i];
    if (i) out += ',';
    out += '{';
    append_key(out, "agreement");
    append_double(out, r.agreement);
    out += ',';
    append_key(out, "fixed_mean");
    append_double(out, r.fixed_mean);
    out += ',';
    append_key(out, "adaptive_mean");
    append_double(out, r.adaptive_mean);
    out += ',';
    append_key(out, "gap");
    append_double(out, r.gap.mean);
    out += ',';
    append_key(out, "gap_se");
    append_double(out, r.gap.se);
    out += ",\"fixed_censored\":" + std::to_string(r.fixed_censored);
    out += ",\"adaptive_censored\":" + std::to_string(r.adaptive_censored);
    out += ',';
    append_key(out, "adaptive_median_eta");
    append_double(out, r.adaptive_median_eta);
    out += '}';
  }
  out += "]\n";
  return out;
}

}  // namespace pprm
