#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pprm/cli.hpp"
#include "pprm/config.hpp"
#include "pprm/error.hpp"
#include "pprm/harness.hpp"
#include "pprm/io.hpp"
#include "pprm/monitors.hpp"
#include "pprm/simulator.hpp"

namespace pprm::cli {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> horizon;
};

RunConfig load_config(const CommonOptions& o) {
  RunConfig config = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
  if (o.horizon) config.scenario.horizon = *o.horizon;
  config.validate();
  return config;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--horizon", o.horizon, "Override scenario.horizon");
}

// Writes to `path`, or to `fallback` when path is empty or "-".
template <typename Fn>
void with_output(const std::string& path, std::ostream& fallback, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(fallback);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot write " + path);
  fn(file);
  if (!file) throw Error("failed writing " + path);
}

Method require_method(const std::string& name) {
  const auto m = parse_method(name);
  if (!m) throw ConfigError("unknown method \"" + name + "\"");
  return m.value();
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cmd_simulate(const CommonOptions& common, const std::string& output,
                 const std::string& source_output, std::ostream& out) {
  RunConfig config = load_config(common);
  if (common.seed) config.scenario.seed = *common.seed;
  const SimulatedStream stream = generate_stream(config.scenario);
  with_output(output, out, [&](std::ostream& o) { write_stream(o, stream.batches); });
  if (!source_output.empty()) {
    const SimulatedStream source = generate_source(config.scenario);
    with_output(source_output, out, [&](std::ostream& o) { write_stream(o, source.batches); });
  }
  return kExitOk;
}

int cmd_calibrate(const CommonOptions& common, const std::string& source_path,
                  const std::string& method_name, const std::string& bound_name,
                  const std::string& output, std::ostream& out) {
  const RunConfig config = load_config(common);
  const SourceData source = pool_source(read_stream_file(source_path));
  if (source.labeled.empty()) throw CalibrationError("source file holds no labeled pairs");

  std::optional<Method> method;
  if (!method_name.empty()) method = require_method(method_name);
  Calibration calib;
  if (method == Method::URM) {
    if (source.labeled_proxies.empty()) {
      throw CalibrationError("URM calibration needs labeled proxies in the source file");
    }
    std::vector<double> losses;
    losses.reserve(source.labeled.size());
    for (const auto& p : source.labeled) losses.push_back(p.true_loss);
    calib = urm_calibrate(source.labeled_proxies, losses, config.monitor);
  } else {
    SourceBoundMethod bound = method == Method::SRM ? SourceBoundMethod::hoeffding_labeled_only
                                                    : config.monitor.source_bound_method;
    if (!bound_name.empty()) {
      const auto parsed = parse_source_bound_method(bound_name);
      if (!parsed) throw ConfigError("unknown bound \"" + bound_name + "\"");
      bound = *parsed;
    }
    calib = calibrate_source(source, bound, config.monitor);
  }
  with_output(output, out, [&](std::ostream& o) { o << calibration_to_json(calib); });
  return kExitOk;
}

int cmd_monitor(const CommonOptions& common, const std::string& stream_path,
                const std::string& calibration_path, const std::string& method_name,
                const std::string& output, const std::string& summary_path, std::ostream& out,
                std::ostream& err) {
  const RunConfig config = load_config(common);
  const Calibration calib = calibration_from_json(read_text(calibration_path));
  const std::vector<StepBatch> batches = read_stream_file(stream_path);

  std::vector<BoundTrace> trace;
  trace.reserve(batches.size());
  if (const auto* urm = std::get_if<UrmCalibration>(&calib)) {
    if (!method_name.empty() && require_method(method_name) != Method::URM) {
      throw ConfigError("a URM calibration can only drive the URM monitor");
    }
    UnsupervisedMonitor monitor(config.monitor, *urm);
    for (const auto& b : batches) trace.push_back(monitor.step(b));
  } else {
    MonitorKind kind = MonitorKind::prediction_powered;
    MonitorConfig mc = config.monitor;
    if (!method_name.empty()) {
      switch (require_method(method_name)) {
        case Method::SRM:
          kind = MonitorKind::supervised;
          break;
        case Method::PPRM_fixed:
          mc.eta_policy.mode = EtaMode::fixed;
          break;
        case Method::PPRM_adaptive:
        case Method::PPRM_ideal:
          mc.eta_policy.mode = EtaMode::adaptive;
          break;
        case Method::URM:
          throw ConfigError("the URM monitor needs a URM calibration");
      }
    }
    RiskMonitor monitor(kind, mc, std::get<SourceCalibration>(calib));
    for (const auto& b : batches) trace.push_back(monitor.step(b));
  }

  with_output(output, out, [&](std::ostream& o) { write_trace_csv(o, trace); });
  const std::string summary = monitor_summary_json(trace);
  if (summary_path.empty()) {
    err << summary;
  } else {
    with_output(summary_path, out, [&](std::ostream& o) { o << summary; });
  }
  return first_alarm_time(trace) ? kExitAlarm : kExitOk;
}

struct ExperimentOptions {
  std::vector<std::string> methods;
  std::optional<std::size_t> replications;
  std::optional<std::size_t> threads;
  std::string output;
  std::string output_dir;
  bool compare_eta = false;
};

int cmd_experiment(const CommonOptions& common, const ExperimentOptions& opts,
                   std::ostream& out) {
  RunConfig config = load_config(common);
  if (common.seed) config.experiment.base_seed = *common.seed;
  if (opts.replications) config.experiment.replications = *opts.replications;
  if (opts.threads) config.experiment.threads = *opts.threads;
  if (!opts.methods.empty()) {
    config.experiment.methods.clear();
    for (const auto& m : opts.methods) config.experiment.methods.push_back(require_method(m));
  }
  config.validate();
  const ExperimentPlan plan = config.plan();

  if (opts.compare_eta) {
    const auto rows = compare_eta_modes(plan, config.experiment.agreement_levels);
    with_output(opts.output, out, [&](std::ostream& o) { o << eta_mode_table_json(rows); });
    return kExitOk;
  }

  TraceSink sink;
  if (!opts.output_dir.empty()) {
    fs::create_directories(opts.output_dir);
    const fs::path dir = opts.output_dir;
    sink = [dir](std::size_t rep, Method method, std::span<const BoundTrace> trace) {
      std::ostringstream name;
      name << "rep" << std::setw(4) << std::setfill('0') << rep << '_' << method_name(method)
           << ".csv";
      std::ofstream file(dir / name.str(), std::ios::binary);
      if (!file) throw Error("cannot write " + (dir / name.str()).string());
      write_trace_csv(file, trace);
    };
  }
  const ExperimentSummary summary = run_experiment(plan, sink);
  with_output(opts.output, out, [&](std::ostream& o) { o << experiment_summary_json(summary); });
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sequential risk monitoring with prediction-powered estimates", "pprm"};
  app.require_subcommand(1);

  CommonOptions common;

  auto* defaults = app.add_subcommand("defaults", "Print the default configuration as JSON");

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic stream");
  add_common(simulate, common);
  simulate->add_option("--seed", common.seed, "Override scenario.seed");
  std::string sim_output;
  std::string source_output;
  simulate->add_option("-o,--output", sim_output, "Stream file (default stdout)");
  simulate->add_option("--source-output", source_output, "Also write source calibration data");

  auto* calibrate = app.add_subcommand("calibrate", "Bound the source risk from a source file");
  add_common(calibrate, common);
  std::string source_path;
  std::string calib_method;
  std::string bound_name;
  std::string calib_output;
  calibrate->add_option("source", source_path, "Source stream file")
      ->required()
      ->check(CLI::ExistingFile);
  calibrate->add_option("--method", calib_method, "SRM, PPRM_fixed, PPRM_adaptive or URM");
  calibrate->add_option("--bound", bound_name, "hoeffding_labeled_only or betting_ppi");
  calibrate->add_option("-o,--output", calib_output, "Calibration JSON (default stdout)");

  auto* monitor = app.add_subcommand("monitor", "Run a monitor over a stream");
  add_common(monitor, common);
  std::string stream_path;
  std::string calibration_path;
  std::string monitor_method;
  std::string trace_output;
  std::string summary_path;
  monitor->add_option("stream", stream_path, "Stream file")->required()->check(CLI::ExistingFile);
  monitor->add_option("--calibration", calibration_path, "Calibration JSON")
      ->required()
      ->check(CLI::ExistingFile);
  monitor->add_option("--method", monitor_method, "SRM, PPRM_fixed, PPRM_adaptive or URM");
  monitor->add_option("-o,--output", trace_output, "Trace CSV (default stdout)");
  monitor->add_option("--summary", summary_path, "Summary JSON (default stderr)");

  auto* experiment = app.add_subcommand("experiment", "Run a replicated Monte Carlo experiment");
  add_common(experiment, common);
  experiment->add_option("--seed", common.seed, "Override experiment.base_seed");
  ExperimentOptions exp;
  experiment->add_option("--method", exp.methods, "Restrict to these methods (repeatable)");
  experiment->add_option("--replications", exp.replications, "Override experiment.replications");
  experiment->add_option("--threads", exp.threads, "Override experiment.threads");
  experiment->add_option("-o,--output", exp.output, "Summary JSON (default stdout)");
  experiment->add_option("--output-dir", exp.output_dir, "Write per-replication trace CSVs");
  experiment->add_flag("--compare-eta", exp.compare_eta,
                       "Compare fixed and adaptive eta over experiment.agreement_levels");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (defaults->parsed()) {
      out << run_config_to_json(RunConfig{});
      return kExitOk;
    }
    if (simulate->parsed()) return cmd_simulate(common, sim_output, source_output, out);
    if (calibrate->parsed()) {
      return cmd_calibrate(common, source_path, calib_method, bound_name, calib_output, out);
    }
    if (monitor->parsed()) {
      return cmd_monitor(common, stream_path, calibration_path, monitor_method, trace_output,
                         summary_path, out, err);
    }
    if (experiment->parsed()) return cmd_experiment(common, exp, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace pprm::cli
