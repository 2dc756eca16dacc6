#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "distret/mdp.hpp"
#include "distret/operators.hpp"

namespace distret {

/// Flat key=value experiment settings. Every key is echoed into CSV headers.
///
/// File syntax: one `key = value` per line, `#` starts a comment, lists are
/// comma separated. Unknown keys are rejected.
struct ExperimentConfig {
  std::string experiment;
  std::string mdp = "random";  ///< random | counterexample | chain3 | file
  std::string mdp_file;
  int num_mdps = 10;
  int num_states = 3;
  int num_actions = 2;
  double dirichlet = 0.5;
  double gamma = 0.9;
  double epsilon = 0.5;
  std::vector<double> epsilon_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  std::string epsilon_convention = "away";  ///< away: eps = 0 is on-policy; toward: eps = 1 is
  std::string trace = "clipped";            ///< constant | clipped | clipped_lambda | full_is | truncated_is
  double cbar = 1.0;
  std::vector<double> cbar_grid{0.2, 0.5, 1.0, 2.0};
  double lambda = 1.0;
  int truncation = 1;
  int horizon = 2;  ///< c_t = 0 for t > horizon; bootstrap depth horizon + 1
  std::string representation = "quantile";  ///< quantile | categorical | none
  int num_atoms = 100;
  double vmax = 0.0;  ///< categorical half-width; 0 picks the MDP's return bound
  int iterations = 30;
  double fp_tol = 1e-11;
  int fp_max_iters = 500;
  int truth_atoms = 1000;
  int truth_iters = 400;
  double metric_p = 2.0;
  std::uint64_t seed = 0;
  std::string out;
  int runs = 10;
  int configs = 5;
  int trajectories = 100000;
  double alpha = 0.0;  ///< 0 selects the command's own default
  int epochs = 3000;
  int jobs = 1;
  std::size_t max_atoms = 100000;

  /// Sets one key from its textual value.
  void set(const std::string& key, const std::string& value);
  /// (key, value) pairs in a fixed order, values printed round-trip exact.
  std::vector<std::pair<std::string, std::string>> entries() const;

  TraceConfig trace_config() const;
  TraceConfig trace_config(double cbar_value) const;
  MixConvention convention() const;
};

/// Defaults for a named command; unknown names get the generic defaults.
ExperimentConfig default_config(const std::string& experiment);

void parse_config(std::istream& is, ExperimentConfig& cfg);
void load_config(const std::string& path, ExperimentConfig& cfg);

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunResult {
  std::string csv;
  std::vector<Check> checks;

  bool ok() const;
};

/// Runs fn(0) .. fn(n - 1) on up to `jobs` threads. Callers write results into
/// pre-sized slots, so output order never depends on scheduling.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

/// The i-th random MDP of a sweep (or the configured built-in / file MDP).
TabularMDP sweep_mdp(const ExperimentConfig& cfg, int index);

/// Target policy for sweep MDP `index` at off-policyness eps; the behaviour
/// policy is uniform.
Policy sweep_target(const ExperimentConfig& cfg, const TabularMDP& mdp, int index, double eps);

Projection sweep_projection(const ExperimentConfig& cfg, const TabularMDP& mdp);

/// Converged projected Retrace plus the convergence curve from delta_0.
struct SweepCell {
  FixedPointResult fixed_point;
  std::vector<double> distance;       ///< sup L_p(eta_k, eta_R), k = 0..iterations
  std::vector<double> distance_winf;  ///< sup W_inf(eta_k, eta_R)
  std::vector<double> step_winf;      ///< sup W_inf(eta_{k+1}, eta_k), k = 0..iterations-1
  double auc = 0.0;                   ///< sum_k distance[k] / distance[0]
  ContractionRate rate;
};

SweepCell run_sweep_cell(const ExperimentConfig& cfg, const TabularMDP& mdp, const Policy& pi,
                         const Policy& mu, const TraceConfig& trace, OperatorKind kind = OperatorKind::retrace);

/// Cells of one sweep, indexed [mdp * keys.size() + key].
struct SweepGrid {
  std::vector<double> keys;
  int num_mdps = 0;
  int n_keys = 0;
  std::vector<SweepCell> cells;

  const SweepCell& at(int mdp, int key) const { return cells[static_cast<std::size_t>(mdp * n_keys + key)]; }
};

/// MDP x epsilon cells at the configured trace.
SweepGrid offpolicy_grid(const ExperimentConfig& cfg);
/// MDP x cbar cells at the configured epsilon.
SweepGrid trace_grid(const ExperimentConfig& cfg);

/// L_p between two vectors at pair 0 and over all pairs (sup).
struct PairDistance {
  double at_start = 0.0;
  double sup = 0.0;
};

PairDistance fixed_point_error(const DistVector& eta, const DistVector& reference, double p);

RunResult cmd_counterexample(const ExperimentConfig& cfg);
RunResult cmd_sweep_offpolicy(const ExperimentConfig& cfg);
RunResult cmd_sweep_trace(const ExperimentConfig& cfg);
RunResult cmd_fixed_point_quality(const ExperimentConfig& cfg);
/// Reports over precomputed grids; the cmd_ versions build the grid first.
RunResult report_sweep_offpolicy(const ExperimentConfig& cfg, const SweepGrid& grid);
RunResult report_sweep_trace(const ExperimentConfig& cfg, const SweepGrid& grid);
RunResult report_fixed_point_quality(const ExperimentConfig& cfg, const SweepGrid& grid);

RunResult cmd_uncorrected_bias(const ExperimentConfig& cfg);
RunResult cmd_unbiasedness(const ExperimentConfig& cfg);
RunResult cmd_forward_backward(const ExperimentConfig& cfg);

/// Dispatch by command name (the CLI subcommand spelling).
RunResult run_experiment(const std::string& command, const ExperimentConfig& cfg);

const std::vector<std::string>& experiment_names();

std::string library_version();

}  // namespace distret
