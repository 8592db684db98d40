#include "pprm/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "pprm/error.hpp"

namespace pprm {

namespace {

using nlohmann::ordered_json;

// A JSON object plus its dotted path, for error messages.
class Section {
 public:
  Section(const ordered_json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(label() + " must be an object");
  }

  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, _] : obj_.items()) {
      bool known = false;
      for (auto k : keys) known = known || key == k;
      if (!known) throw ConfigError("unknown config key \"" + join(key) + "\"");
    }
  }

  bool has(std::string_view key) const { return obj_.contains(key); }

  Section sub(std::string_view key) const { return Section(obj_.at(key), join(key)); }

  void read(std::string_view key, double& out) const {
    if (!has(key)) return;
    const auto& v = obj_.at(key);
    if (!v.is_number()) throw ConfigError(join(key) + " must be a number");
    out = v.get<double>();
  }

  template <typename Int>
    requires std::is_integral_v<Int>
  void read(std::string_view key, Int& out) const {
    if (!has(key)) return;
    const auto& v = obj_.at(key);
    if (std::is_unsigned_v<Int> ? !v.is_number_unsigned() : !v.is_number_integer()) {
      throw ConfigError(join(key) + " must be an integer" +
                        (std::is_unsigned_v<Int> ? " >= 0" : ""));
    }
    out = v.get<Int>();
  }

  std::optional<std::string> string(std::string_view key) const {
    if (!has(key)) return std::nullopt;
    const auto& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError(join(key) + " must be a string");
    return v.get<std::string>();
  }

  const ordered_json& raw(std::string_view key) const { return obj_.at(key); }

  std::string join(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

 private:
  std::string label() const { return path_.empty() ? "config" : path_; }

  const ordered_json& obj_;
  std::string path_;
};

void read_monitor(const Section& s, MonitorConfig& m) {
  s.allow({"eps_tol", "source_bound_method", "source_eta", "initial_prediction", "urm"});
  s.read("eps_tol", m.eps_tol);
  if (auto name = s.string("source_bound_method")) {
    if (*name == "betting_ppi") {
      m.source_bound_method = SourceBoundMethod::betting_ppi;
    } else if (*name == "hoeffding_labeled_only") {
      m.source_bound_method = SourceBoundMethod::hoeffding_labeled_only;
    } else {
      throw ConfigError(s.join("source_bound_method") + ": unknown value \"" + *name + "\"");
    }
  }
  s.read("source_eta", m.source_eta);
  s.read("initial_prediction", m.initial_prediction);
  if (s.has("urm")) {
    const Section u = s.sub("urm");
    u.allow({"quantile_grid", "pfp_share"});
    u.read("quantile_grid", m.urm.quantile_grid);
    u.read("pfp_share", m.urm.pfp_share);
  }
}

void read_eta(const Section& s, EtaPolicy& e) {
  s.allow({"mode", "eta_fixed", "eta_init", "eta_max", "window_L"});
  if (auto mode = s.string("mode")) {
    if (*mode == "fixed") {
      e.mode = EtaMode::fixed;
    } else if (*mode == "adaptive") {
      e.mode = EtaMode::adaptive;
    } else {
      throw ConfigError(s.join("mode") + ": unknown value \"" + *mode + "\"");
    }
  }
  s.read("eta_fixed", e.eta_fixed);
  s.read("eta_init", e.eta_init);
  s.read("eta_max", e.eta_max);
  s.read("window_L", e.window_L);
}

void read_cs(const Section& s, ConfidenceSequenceSpec& c) {
  s.allow({"delta_T", "lambda_max", "quadrature_nodes", "root_tol", "max_bracket_doublings"});
  s.read("delta_T", c.delta_T);
  s.read("lambda_max", c.lambda_max);
  s.read("quadrature_nodes", c.quadrature_nodes);
  s.read("root_tol", c.root_tol);
  s.read("max_bracket_doublings", c.max_bracket_doublings);
}

void read_betting(const Section& s, BettingSpec& b) {
  s.allow({"delta_S", "grid_size", "bet_cap", "variance_floor"});
  s.read("delta_S", b.delta_S);
  s.read("grid_size", b.grid_size);
  s.read("bet_cap", b.bet_cap);
  s.read("variance_floor", b.variance_floor);
}

void read_schedule(const Section& s, Schedule& out) {
  const auto kind = s.string("kind").value_or("constant");
  if (kind == "constant") {
    s.allow({"kind", "p"});
    double p = out.first;
    s.read("p", p);
    out = Schedule::constant(p);
  } else if (kind == "step") {
    s.allow({"kind", "t0", "before", "after"});
    Schedule x = Schedule::step(200, 0.3, 0.55);
    s.read("t0", x.t0);
    x.t1 = x.t0;
    s.read("before", x.first);
    s.read("after", x.second);
    out = x;
  } else if (kind == "ramp" || kind == "pulse") {
    const bool ramp = kind == "ramp";
    if (ramp) {
      s.allow({"kind", "t0", "t1", "before", "after"});
    } else {
      s.allow({"kind", "t0", "t1", "base", "peak"});
    }
    Schedule x = ramp ? Schedule::ramp(200, 400, 0.3, 0.55) : Schedule::pulse(200, 400, 0.3, 0.55);
    s.read("t0", x.t0);
    s.read("t1", x.t1);
    s.read(ramp ? "before" : "base", x.first);
    s.read(ramp ? "after" : "peak", x.second);
    out = x;
  } else {
    throw ConfigError(s.join("kind") + ": unknown schedule \"" + kind + "\"");
  }
}

void read_scenario(const Section& s, DriftScenario& d) {
  s.allow({"loss_model", "schedule", "agreement", "n_per_step", "N_per_step", "horizon", "seed",
           "source_risk", "source_labeled", "source_unlabeled", "proxy_noise", "noise_scale"});
  if (auto model = s.string("loss_model")) {
    if (*model == "bernoulli") {
      d.loss_model = LossModel::bernoulli;
    } else if (*model == "bounded_continuous") {
      d.loss_model = LossModel::bounded_continuous;
    } else {
      throw ConfigError(s.join("loss_model") + ": unknown value \"" + *model + "\"");
    }
  }
  if (s.has("schedule")) read_schedule(s.sub("schedule"), d.schedule);
  s.read("agreement", d.agreement);
  s.read("n_per_step", d.n_per_step);
  s.read("N_per_step", d.N_per_step);
  s.read("horizon", d.horizon);
  s.read("seed", d.seed);
  if (s.has("source_risk") && !s.raw("source_risk").is_null()) {
    double r = 0.0;
    s.read("source_risk", r);
    d.source_risk = r;
  }
  s.read("source_labeled", d.source_labeled);
  s.read("source_unlabeled", d.source_unlabeled);
  s.read("proxy_noise", d.proxy_noise);
  s.read("noise_scale", d.noise_scale);
}

void read_experiment(const Section& s, ExperimentSettings& e) {
  s.allow({"methods", "replications", "base_seed", "threads", "agreement_levels"});
  if (s.has("methods")) {
    const auto& arr = s.raw("methods");
    if (!arr.is_array()) throw ConfigError(s.join("methods") + " must be an array");
    e.methods.clear();
    for (const auto& m : arr) {
      if (!m.is_string()) throw ConfigError(s.join("methods") + " entries must be strings");
      const auto parsed = parse_method(m.get<std::string>());
      if (!parsed) {
        throw ConfigError(s.join("methods") + ": unknown method \"" + m.get<std::string>() + "\"");
      }
      e.methods.push_back(*parsed);
    }
  }
  s.read("replications", e.replications);
  s.read("base_seed", e.base_seed);
  s.read("threads", e.threads);
  if (s.has("agreement_levels")) {
    const auto& arr = s.raw("agreement_levels");
    if (!arr.is_array()) throw ConfigError(s.join("agreement_levels") + " must be an array");
    e.agreement_levels.clear();
    for (const auto& x : arr) {
      if (!x.is_number()) throw ConfigError(s.join("agreement_levels") + " entries must be numbers");
      e.agreement_levels.push_back(x.get<double>());
    }
  }
}

std::string_view schedule_kind_name(Schedule::Kind kind) {
  switch (kind) {
    case Schedule::Kind::constant:
      return "constant";
    case Schedule::Kind::step:
      return "step";
    case Schedule::Kind::ramp:
      return "ramp";
    case Schedule::Kind::pulse:
      return "pulse";
  }
  return "constant";
}

}  // namespace

ExperimentPlan RunConfig::plan() const {
  ExperimentPlan p;
  p.scenario = scenario;
  p.methods = experiment.methods;
  p.replications = experiment.replications;
  p.base_seed = experiment.base_seed;
  p.config = monitor;
  p.threads = experiment.threads;
  return p;
}

void RunConfig::validate() const {
  try {
    monitor.validate();
    scenario.validate();
    if (experiment.replications < 1) throw ConfigError("experiment.replications must be >= 1");
    if (experiment.methods.empty()) throw ConfigError("experiment.methods must not be empty");
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

RunConfig parse_run_config(std::string_view json_text) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  const Section top(root, "");
  top.allow({"monitor", "eta", "confidence_sequence", "betting", "scenario", "experiment"});
  RunConfig c;
  if (top.has("monitor")) read_monitor(top.sub("monitor"), c.monitor);
  if (top.has("eta")) read_eta(top.sub("eta"), c.monitor.eta_policy);
  if (top.has("confidence_sequence")) read_cs(top.sub("confidence_sequence"), c.monitor.cs_spec);
  if (top.has("betting")) read_betting(top.sub("betting"), c.monitor.betting_spec);
  if (top.has("scenario")) read_scenario(top.sub("scenario"), c.scenario);
  if (top.has("experiment")) read_experiment(top.sub("experiment"), c.experiment);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

std::string run_config_to_json(const RunConfig& c) {
  const MonitorConfig& m = c.monitor;
  const EtaPolicy& e = m.eta_policy;
  const DriftScenario& d = c.scenario;
  ordered_json j;
  j["monitor"] = {
      {"eps_tol", m.eps_tol},
      {"source_bound_method", m.source_bound_method == SourceBoundMethod::betting_ppi
                                  ? "betting_ppi"
                                  : "hoeffding_labeled_only"},
      {"source_eta", m.source_eta},
      {"initial_prediction", m.initial_prediction},
      {"urm", {{"quantile_grid", m.urm.quantile_grid}, {"pfp_share", m.urm.pfp_share}}}};
  j["eta"] = {{"mode", e.mode == EtaMode::fixed ? "fixed" : "adaptive"},
              {"eta_fixed", e.eta_fixed},
              {"eta_init", e.eta_init},
              {"eta_max", e.eta_max},
              {"window_L", e.window_L}};
  j["confidence_sequence"] = {{"delta_T", m.cs_spec.delta_T},
                              {"lambda_max", m.cs_spec.lambda_max},
                              {"quadrature_nodes", m.cs_spec.quadrature_nodes},
                              {"root_tol", m.cs_spec.root_tol},
                              {"max_bracket_doublings", m.cs_spec.max_bracket_doublings}};
  j["betting"] = {{"delta_S", m.betting_spec.delta_S},
                  {"grid_size", m.betting_spec.grid_size},
                  {"bet_cap", m.betting_spec.bet_cap},
                  {"variance_floor", m.betting_spec.variance_floor}};

  ordered_json schedule;
  schedule["kind"] = schedule_kind_name(d.schedule.kind);
  switch (d.schedule.kind) {
    case Schedule::Kind::constant:
      schedule["p"] = d.schedule.first;
      break;
    case Schedule::Kind::step:
      schedule["t0"] = d.schedule.t0;
      schedule["before"] = d.schedule.first;
      schedule["after"] = d.schedule.second;
      break;
    case Schedule::Kind::ramp:
      schedule["t0"] = d.schedule.t0;
      schedule["t1"] = d.schedule.t1;
      schedule["before"] = d.schedule.first;
      schedule["after"] = d.schedule.second;
      break;
    case Schedule::Kind::pulse:
      schedule["t0"] = d.schedule.t0;
      schedule["t1"] = d.schedule.t1;
      schedule["base"] = d.schedule.first;
      schedule["peak"] = d.schedule.second;
      break;
  }
  j["scenario"] = {
      {"loss_model", d.loss_model == LossModel::bernoulli ? "bernoulli" : "bounded_continuous"},
      {"schedule", schedule},
      {"agreement", d.agreement},
      {"n_per_step", d.n_per_step},
      {"N_per_step", d.N_per_step},
      {"horizon", d.horizon},
      {"seed", d.seed},
      {"source_risk", d.source_risk ? ordered_json(*d.source_risk) : ordered_json(nullptr)},
      {"source_labeled", d.source_labeled},
      {"source_unlabeled", d.source_unlabeled},
      {"proxy_noise", d.proxy_noise},
      {"noise_scale", d.noise_scale}};

  ordered_json methods = ordered_json::array();
  for (Method meth : c.experiment.methods) methods.push_back(method_name(meth));
  j["experiment"] = {{"methods", methods},
                     {"replications", c.experiment.replications},
                     {"base_seed", c.experiment.base_seed},
                     {"threads", c.experiment.threads},
                     {"agreement_levels", c.experiment.agreement_levels}};
  return j.dump(2) + "\n";
}

}  // namespace pprm
