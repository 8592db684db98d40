#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pprm/harness.hpp"
#include "pprm/monitors.hpp"
#include "pprm/simulator.hpp"

namespace pprm {

struct ExperimentSettings {
  std::vector<Method> methods{Method::SRM, Method::PPRM_fixed, Method::PPRM_adaptive,
                              Method::URM, Method::PPRM_ideal};
  std::size_t replications = 100;
  std::uint64_t base_seed = 1;
  std::size_t threads = 0;
  /// Agreement grid for the fixed-vs-adaptive eta comparison.
  std::vector<double> agreement_levels{0.55, 0.75, 0.95};
};

/// Everything a command can be configured with. Sections and keys:
///
///   monitor              eps_tol, source_bound_method, source_eta,
///                        initial_prediction, urm {quantile_grid, pfp_share}
///   eta                  mode, eta_fixed, eta_init, eta_max, window_L
///   confidence_sequence  delta_T, lambda_max, quadrature_nodes, root_tol,
///                        max_bracket_doublings
///   betting              delta_S, grid_size, bet_cap, variance_floor
///   scenario             loss_model, schedule {kind, p | t0, t1, before,
///                        after | base, peak}, agreement, n_per_step,
///                        N_per_step, horizon, seed, source_risk,
///                        source_labeled, source_unlabeled, proxy_noise,
///                        noise_scale
///   experiment           methods, replications, base_seed, threads,
///                        agreement_levels
///
/// Every key is optional; missing keys keep the defaults above.
struct RunConfig {
  MonitorConfig monitor;
  DriftScenario scenario;
  ExperimentSettings experiment;

  ExperimentPlan plan() const;
  void validate() const;
};

/// Parses and validates. Unknown keys and wrongly typed values throw
/// ConfigError naming the offending key path (e.g. "scenario.horizon").
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON with every key spelled out.
std::string run_config_to_json(const RunConfig& config);

}  // namespace pprm
