#include "pprm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pprm/error.hpp"
#include "pprm/rng.hpp"

namespace pprm {

namespace {

constexpr std::uint64_t kTestStream = 1;
constexpr std::uint64_t kSourceStream = 2;

double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0,1]");
}

struct Sample {
  double true_loss;
  double synth_loss;
  double proxy;
};

class SampleDrawer {
 public:
  SampleDrawer(const DriftScenario& scenario, std::uint64_t stream)
      : scenario_(scenario), rng_(scenario.seed, stream) {}

  // Draw order per sample is fixed: loss draws, then the proxy noise.
  Sample draw(double p) {
    Sample s{};
    if (scenario_.loss_model == LossModel::bernoulli) {
      s.true_loss = rng_.bernoulli(p) ? 1.0 : 0.0;
      s.synth_loss = rng_.bernoulli(scenario_.agreement) ? s.true_loss : 1.0 - s.true_loss;
    } else {
      const double rho = scenario_.agreement;
      const double g1 = rng_.normal();
      const double g2 = rng_.normal();
      const double sigma = scenario_.noise_scale;
      s.true_loss = clip01(p + sigma * g1);
      s.synth_loss = clip01(p + sigma * (rho * g1 + std::sqrt(1.0 - rho * rho) * g2));
    }
    s.proxy = clip01(s.true_loss + scenario_.proxy_noise * rng_.normal());
    return s;
  }

 private:
  const DriftScenario& scenario_;
  Xoshiro256 rng_;
};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

Schedule Schedule::constant(double p) { return {Kind::constant, 1, 1, p, p}; }

Schedule Schedule::step(std::int64_t t0, double before, double after) {
  return {Kind::step, t0, t0, before, after};
}

Schedule Schedule::ramp(std::int64_t t0, std::int64_t t1, double before, double after) {
  return {Kind::ramp, t0, t1, before, after};
}

Schedule Schedule::pulse(std::int64_t t0, std::int64_t t1, double base, double peak) {
  return {Kind::pulse, t0, t1, base, peak};
}

double Schedule::at(std::int64_t t) const {
  switch (kind) {
    case Kind::constant:
      return first;
    case Kind::step:
      return t < t0 ? first : second;
    case Kind::ramp:
      if (t <= t0) return first;
      if (t >= t1) return second;
      return first + (second - first) * static_cast<double>(t - t0) / static_cast<double>(t1 - t0);
    case Kind::pulse:
      return (t >= t0 && t <= t1) ? second : first;
  }
  return first;
}

void DriftScenario::validate() const {
  require_probability(schedule.first, "schedule level");
  require_probability(schedule.second, "schedule level");
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (schedule.kind != Schedule::Kind::constant) {
    if (schedule.t0 < 1 || schedule.t0 > horizon) {
      throw ConfigError("schedule t0 must lie in [1, horizon]");
    }
    if (schedule.kind != Schedule::Kind::step &&
        (schedule.t1 < schedule.t0 || schedule.t1 > horizon)) {
      throw ConfigError("schedule t1 must lie in [t0, horizon]");
    }
    if (schedule.kind == Schedule::Kind::ramp && schedule.t1 == schedule.t0) {
      throw ConfigError("ramp needs t1 > t0");
    }
  }
  if (loss_model == LossModel::bernoulli) {
    require_probability(agreement, "agreement");
  } else if (!(agreement >= -1.0 && agreement <= 1.0)) {
    throw ConfigError("continuous agreement (correlation) must lie in [-1,1]");
  }
  if (n_per_step < 1) throw ConfigError("n_per_step must be at least 1");
  if (source_labeled < 1) throw ConfigError("source_labeled must be at least 1");
  if (source_risk) require_probability(*source_risk, "source_risk");
  if (!(proxy_noise >= 0.0)) throw ConfigError("proxy_noise must be nonnegative");
  if (!(noise_scale > 0.0)) throw ConfigError("noise_scale must be positive");
}

double DriftScenario::source_mean() const { return source_risk.value_or(schedule.at(1)); }

SimulatedStream generate_stream(const DriftScenario& scenario) {
  scenario.validate();
  SampleDrawer drawer(scenario, kTestStream);
  SimulatedStream out;
  out.batches.reserve(static_cast<std::size_t>(scenario.horizon));
  out.hidden_unlabeled_true.reserve(static_cast<std::size_t>(scenario.horizon));
  for (std::int64_t t = 1; t <= scenario.horizon; ++t) {
    const double p = scenario.schedule.at(t);
    StepBatch batch;
    batch.t = t;
    batch.labeled.reserve(scenario.n_per_step);
    for (std::size_t i = 0; i < scenario.n_per_step; ++i) {
      const Sample s = drawer.draw(p);
      batch.labeled.push_back({s.true_loss, s.synth_loss});
    }
    std::vector<double> hidden;
    hidden.reserve(scenario.N_per_step);
    batch.unlabeled_synth.reserve(scenario.N_per_step);
    batch.proxies.reserve(scenario.N_per_step);
    for (std::size_t j = 0; j < scenario.N_per_step; ++j) {
      const Sample s = drawer.draw(p);
      batch.unlabeled_synth.push_back(s.synth_loss);
      batch.proxies.push_back(s.proxy);
      hidden.push_back(s.true_loss);
    }
    out.batches.push_back(std::move(batch));
    out.hidden_unlabeled_true.push_back(std::move(hidden));
  }
  return out;
}

SimulatedStream generate_source(const DriftScenario& scenario) {
  scenario.validate();
  SampleDrawer drawer(scenario, kSourceStream);
  const double p = scenario.source_mean();
  const std::size_t n0 = scenario.source_labeled;
  const std::size_t base = scenario.source_unlabeled / n0;
  const std::size_t extra = scenario.source_unlabeled % n0;

  SimulatedStream out;
  out.batches.reserve(n0);
  for (std::size_t i = 0; i < n0; ++i) {
    StepBatch batch;
    batch.t = static_cast<std::int64_t>(i + 1);
    const Sample labeled = drawer.draw(p);
    batch.labeled.push_back({labeled.true_loss, labeled.synth_loss});
    batch.labeled_proxies.push_back(labeled.proxy);
    std::vector<double> hidden;
    const std::size_t size = base + (i < extra ? 1 : 0);
    for (std::size_t j = 0; j < size; ++j) {
      const Sample s = drawer.draw(p);
      batch.unlabeled_synth.push_back(s.synth_loss);
      batch.proxies.push_back(s.proxy);
      hidden.push_back(s.true_loss);
    }
    out.batches.push_back(std::move(batch));
    out.hidden_unlabeled_true.push_back(std::move(hidden));
  }
  return out;
}

std::vector<StepBatch> with_true_labels(const SimulatedStream& stream) {
  std::vector<StepBatch> out = stream.batches;
  for (std::size_t k = 0; k < out.size(); ++k) {
    for (auto& pair : out[k].labeled) pair.synth_loss = pair.true_loss;
    out[k].unlabeled_synth = stream.hidden_unlabeled_true[k];
  }
  return out;
}

double step_mean(const DriftScenario& scenario, std::int64_t t) {
  const double p = scenario.schedule.at(t);
  if (scenario.loss_model == LossModel::bernoulli) return p;
  // E[clip01(p + sigma Z)] in closed form.
  const double sigma = scenario.noise_scale;
  const double a = -p / sigma;
  const double b = (1.0 - p) / sigma;
  return p * (normal_cdf(b) - normal_cdf(a)) + sigma * (normal_pdf(a) - normal_pdf(b)) +
         (1.0 - normal_cdf(b));
}

double true_running_risk(const DriftScenario& scenario, std::int64_t t) {
  if (t < 1 || t > scenario.horizon) throw ParameterError("t must lie in [1, horizon]");
  double sum = 0.0;
  for (std::int64_t k = 1; k <= t; ++k) sum += step_mean(scenario, k);
  return sum / static_cast<double>(t);
}

}  // namespace pprm
