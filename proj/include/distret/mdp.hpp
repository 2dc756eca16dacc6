#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "distret/errors.hpp"
#include "distret/rng.hpp"

namespace distret {

struct StateAction {
  int state = 0;
  int action = 0;
  friend bool operator==(const StateAction&, const StateAction&) = default;
};

struct RewardOutcome {
  double value = 0.0;
  double prob = 1.0;
};

/// Finite MDP with finitely supported rewards.
///
/// Pairs (x, a) are laid out row-major: `index(x, a) = x * num_actions + a`.
/// The transition matrix has one row per pair and one column per next state.
/// A state may carry a terminal value v: episodes stop on entering it and its
/// return distribution is pinned to the Dirac at v.
class TabularMDP {
 public:
  TabularMDP(int num_states, int num_actions, std::vector<std::vector<RewardOutcome>> rewards,
             Eigen::MatrixXd transition, double gamma,
             std::vector<std::optional<double>> terminal_values = {});

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int num_pairs() const { return num_states_ * num_actions_; }
  double gamma() const { return gamma_; }
  int index(int x, int a) const { return x * num_actions_ + a; }
  int index(StateAction sa) const { return index(sa.state, sa.action); }
  StateAction pair(int index) const { return {index / num_actions_, index % num_actions_}; }

  const std::vector<RewardOutcome>& rewards(int x, int a) const { return rewards_[index(x, a)]; }
  double mean_reward(int x, int a) const;
  double max_abs_reward() const;

  const Eigen::MatrixXd& transitions() const { return transition_; }
  auto transition(int x, int a) const { return transition_.row(index(x, a)); }

  bool is_terminal(int x) const { return terminal_[x].has_value(); }
  double terminal_value(int x) const { return terminal_[x].value_or(0.0); }
  const std::vector<std::optional<double>>& terminal_values() const { return terminal_; }

  /// Bound on |return| from any pair.
  double return_bound() const;

  friend bool operator==(const TabularMDP& l, const TabularMDP& r);

 private:
  int num_states_;
  int num_actions_;
  std::vector<std::vector<RewardOutcome>> rewards_;
  Eigen::MatrixXd transition_;
  double gamma_;
  std::vector<std::optional<double>> terminal_;
};

/// Stochastic policy, one probability row per state.
class Policy {
 public:
  Policy() = default;
  explicit Policy(Eigen::MatrixXd probs);

  int num_states() const { return static_cast<int>(probs_.rows()); }
  int num_actions() const { return static_cast<int>(probs_.cols()); }
  double operator()(int x, int a) const { return probs_(x, a); }
  auto row(int x) const { return probs_.row(x); }
  const Eigen::MatrixXd& matrix() const { return probs_; }

  friend bool operator==(const Policy& l, const Policy& r) { return l.probs_ == r.probs_; }

 private:
  Eigen::MatrixXd probs_;
};

// --- generators -------------------------------------------------------------

/// Random MDP: one standard-normal reward per pair, Dirichlet(conc) rows.
TabularMDP make_random_mdp(std::uint64_t seed, int num_states, int num_actions,
                           double dirichlet_conc, double gamma);

/// One state, one action, reward 1, self loop.
TabularMDP make_counterexample_mdp(double gamma = 0.5);

/// x1 -> x2 -> x3 with zero rewards; x3 is terminal with value 1.
TabularMDP make_chain3_mdp(double gamma = 0.5);

Policy uniform_policy(int num_states, int num_actions);
Policy deterministic_policy(const std::vector<int>& actions, int num_actions);
Policy random_deterministic_policy(int num_states, int num_actions, Rng& rng);

enum class MixConvention {
  target_moves_away,  ///< pi = (1 - eps) mu + eps pi_d; eps = 0 is on-policy
  target_moves_toward ///< pi = (1 - eps) pi_d + eps mu
};

Policy mix_policy(const Policy& pi_d, const Policy& mu, double epsilon,
                  MixConvention convention = MixConvention::target_moves_away);

double is_ratio(const Policy& pi, const Policy& mu, int x, int a);

// --- traces -----------------------------------------------------------------

enum class TraceKind { constant, clipped_is, clipped_is_lambda, full_is, truncated_is };

/// Trace coefficient family c_t plus the horizon after which c_t = 0.
struct TraceConfig {
  TraceKind kind = TraceKind::clipped_is;
  double lambda = 1.0;
  double cbar = 1.0;
  int truncation = 1;  ///< n for truncated_is: c_t = rho_t for t < n
  int horizon = 1;     ///< c_t = 0 for t > horizon

  static TraceConfig constant(double lambda, int horizon);
  static TraceConfig clipped(double cbar, int horizon);
  static TraceConfig clipped_lambda(double lambda, double cbar, int horizon);
  static TraceConfig full_is(int horizon);
  static TraceConfig truncated_is(int n, int horizon);

  /// Whether c_t <= rho_t holds for every rho (constant: only when on-policy).
  bool guarantees_retrace_condition() const;
  void validate() const;
  std::string describe() const;
};

double trace_coeff(const TraceConfig& cfg, double rho, int t);

// --- trajectories -----------------------------------------------------------

struct Transition {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  double rho = 1.0;  ///< pi(action|state) / mu(action|state)
};

struct Trajectory {
  StateAction start;
  std::vector<Transition> steps;
  bool terminated = false;  ///< last next_state is terminal

  std::size_t size() const { return steps.size(); }
};

/// Samples from `start` (forced first pair), then actions from `behavior`.
Trajectory sample_trajectory(const TabularMDP& mdp, const Policy& target, const Policy& behavior,
                             StateAction start, int max_len, Rng& rng);

// --- plain-text format ------------------------------------------------------

void write_mdp(std::ostream& os, const TabularMDP& mdp);
TabularMDP read_mdp(std::istream& is);
void save_mdp(const std::string& path, const TabularMDP& mdp);
TabularMDP load_mdp(const std::string& path);

}  // namespace distret
