#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "distret/mdp.hpp"
#include "distret/measure.hpp"
#include "distret/representation.hpp"

namespace distret {

/// One return distribution per state-action pair, laid out like TabularMDP::index.
class DistVector {
 public:
  DistVector() = default;
  DistVector(int num_states, int num_actions, const DiracMixture& fill = {});

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int num_pairs() const { return static_cast<int>(entries_.size()); }

  DiracMixture& at(int x, int a) { return entries_[static_cast<std::size_t>(x * num_actions_ + a)]; }
  const DiracMixture& at(int x, int a) const { return entries_[static_cast<std::size_t>(x * num_actions_ + a)]; }
  DiracMixture& operator[](int i) { return entries_[static_cast<std::size_t>(i)]; }
  const DiracMixture& operator[](int i) const { return entries_[static_cast<std::size_t>(i)]; }
  std::span<const DiracMixture> entries() const { return entries_; }

  bool is_probability() const;

  friend bool operator==(const DistVector&, const DistVector&) = default;

 private:
  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<DiracMixture> entries_;
};

/// Pins every pair of a terminal state to the Dirac at its terminal value.
void apply_terminal_values(const TabularMDP& mdp, DistVector& eta);

/// Same distribution at every pair, terminal states pinned.
DistVector constant_dist_vector(const TabularMDP& mdp, const DiracMixture& m);

/// Pair-wise means as an (S*A) vector.
Eigen::VectorXd mean_vector(const DistVector& eta);

double sup_distance(const DistVector& a, const DistVector& b, Metric metric, double p);

/// w * (b_{shift, scale})_# eta(source).
struct BackupTerm {
  double weight = 0.0;
  double shift = 0.0;
  double scale = 1.0;
  int source = 0;  ///< pair index
  int depth = 0;   ///< scale == gamma^depth
};

struct BackupSpec {
  std::vector<BackupTerm> terms;
  /// Mass not represented by `terms`. Always 0 here: the trace vanishes past
  /// its horizon, so the deepest terms bootstrap and carry the remainder.
  double tail_mass = 0.0;

  double total_weight() const;
  /// sum_i w_i * scale_i; the modulus of the back-up at this pair.
  double weighted_scale() const;
};

DiracMixture apply_backup(const BackupSpec& spec, const DistVector& eta);

/// One-step: E[(b_{R, gamma})_# eta(X', A'^pi)].
BackupSpec bellman_spec(const TabularMDP& mdp, const Policy& pi, int x, int a);

/// Convex decomposition of the distributional Retrace back-up at (x, a) into
/// bootstrapped n-step pushforwards, by exhaustive enumeration of mu-paths.
/// Depth runs up to trace.horizon + 1.
BackupSpec retrace_decompose(const TabularMDP& mdp, const Policy& pi, const Policy& mu,
                             const TraceConfig& trace, int x, int a);

/// E_mu[(b_{G_{0:n-1}, gamma^n})_# eta(X_n, A_n^pi)] without importance weights.
BackupSpec uncorrected_spec(const TabularMDP& mdp, const Policy& pi, const Policy& mu, int n, int x, int a);

/// Importance weights applied to the partial return instead of the path
/// probability: E_mu[(b_{rho_{1:n-1} G_{0:n-1}, gamma^n})_# eta(X_n, A_n^pi)].
/// Kept as a reference for the misplaced correction; its fixed point is biased.
BackupSpec is_on_return_spec(const TabularMDP& mdp, const Policy& pi, const Policy& mu, int n, int x,
                             int a);

/// eta(x,a) + E_mu[sum_t c_{1:t} (b_{0, gamma^t})_# Delta_t]; signed terms.
BackupSpec alt_bar_spec(const TabularMDP& mdp, const Policy& pi, const Policy& mu,
                        const TraceConfig& trace, int x, int a);

/// eta(x,a) + E_mu[sum_t c_{1:t} gamma^t Delta_t]; signed terms.
BackupSpec alt_tilde_spec(const TabularMDP& mdp, const Policy& pi, const Policy& mu,
                          const TraceConfig& trace, int x, int a);

DiracMixture bellman_backup(const DistVector& eta, const TabularMDP& mdp, const Policy& pi, int x, int a);
DiracMixture retrace_backup(const DistVector& eta, const TabularMDP& mdp, const Policy& pi,
                            const Policy& mu, const TraceConfig& trace, int x, int a);
DiracMixture uncorrected_nstep_backup(const DistVector& eta, const TabularMDP& mdp, const Policy& pi,
                                      const Policy& mu, int n, int x, int a);
DiracMixture alt_bar_backup(const DistVector& eta, const TabularMDP& mdp, const Policy& pi,
                            const Policy& mu, const TraceConfig& trace, int x, int a);
DiracMixture alt_tilde_backup(const DistVector& eta, const TabularMDP& mdp, const Policy& pi,
                              const Policy& mu, const TraceConfig& trace, int x, int a);

/// Expected value-based Retrace target at (x, a), computed by propagating the
/// c-weighted pair occupancy forward in time.
double value_retrace_backup(const Eigen::VectorXd& q, const TabularMDP& mdp, const Policy& pi,
                            const Policy& mu, const TraceConfig& trace, int x, int a);

/// Whole-table value Retrace.
Eigen::VectorXd value_retrace(const Eigen::VectorXd& q, const TabularMDP& mdp, const Policy& pi,
                              const Policy& mu, const TraceConfig& trace);

/// Exact Q^pi by solving the linear Bellman system.
Eigen::VectorXd q_values(const TabularMDP& mdp, const Policy& pi);

struct ContractionRate {
  double beta = 0.0;        ///< max over pairs of sum_t E[c_{1:t-1}(1 - c_t)] gamma^t
  double tail_bound = 0.0;  ///< gamma^{horizon + 1}
};

ContractionRate contraction_rate(const TabularMDP& mdp, const Policy& pi, const Policy& mu,
                                 const TraceConfig& trace);

// --- operators on whole tables ----------------------------------------------

enum class OperatorKind { bellman, retrace, uncorrected, alt_bar, alt_tilde, is_on_return };

std::string to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(const std::string& name);

struct Projection {
  enum class Kind { none, quantile, categorical };
  Kind kind = Kind::none;
  int num_atoms = 0;
  Eigen::VectorXd grid;
  /// Unprojected runs only: once an entry exceeds `max_atoms` (0 = never),
  /// dp_iterate continues on a uniform grid of `fallback_points` spanning the
  /// iterate's support. Signed iterates of the path-independent operators
  /// otherwise grow geometrically.
  std::size_t max_atoms = 0;
  int fallback_points = 65537;

  static Projection none() { return {}; }
  static Projection quantile(int m) { return {Kind::quantile, m, {}, 0, 0}; }
  static Projection categorical(Eigen::VectorXd grid) {
    const int m = static_cast<int>(grid.size());
    return {Kind::categorical, m, std::move(grid), 0, 0};
  }
  static Projection capped(std::size_t max_atoms, int fallback_points = 65537) {
    return {Kind::none, 0, {}, max_atoms, fallback_points};
  }
  std::string describe() const;
};

/// Precomputed back-up specs for every pair; applying the operator is then
/// independent of the path enumeration.
class DistOperator {
 public:
  /// `n` is the bootstrap depth for uncorrected / is_on_return, ignored otherwise.
  DistOperator(OperatorKind kind, const TabularMDP& mdp, const Policy& pi, const Policy& mu,
               const TraceConfig& trace, int n = 1);

  OperatorKind kind() const { return kind_; }
  const BackupSpec& spec(int pair) const { return specs_[static_cast<std::size_t>(pair)]; }
  int num_pairs() const { return static_cast<int>(specs_.size()); }

  /// Applies the operator and projects each entry. Unprojected outputs are
  /// compressed at 1e-12. Throws domain_error when a signed entry meets the
  /// quantile projection.
  DistVector operator()(const DistVector& eta, const Projection& proj = {}) const;

 private:
  OperatorKind kind_;
  int num_states_;
  int num_actions_;
  std::vector<std::optional<double>> terminal_;
  std::vector<BackupSpec> specs_;
};

struct DistanceSpec {
  std::string name;  ///< e.g. "W1", "L2", "Winf"
  Metric metric = Metric::cramer;
  double p = 2.0;
};

DistanceSpec parse_distance(const std::string& name);

struct IterateRow {
  int iteration = 0;
  std::string metric_name;
  std::string reference_name;
  double value = 0.0;
};

struct IterateLog {
  std::vector<DistVector> iterates;  ///< eta_0 .. eta_iters
  std::vector<IterateRow> rows;
  int first_gridded = -1;            ///< first iterate on the fallback grid, or -1
  Eigen::VectorXd fallback_grid;
};

struct Reference {
  std::string name;
  DistVector eta;
};

/// eta_k = op^k eta_0 with per-iteration distances to each reference.
IterateLog dp_iterate(const DistOperator& op, const Projection& proj, const DistVector& eta0, int iters,
                      std::span<const Reference> references, std::span<const DistanceSpec> distances);

void write_iterate_csv(std::ostream& os, const IterateLog& log);

struct FixedPointResult {
  DistVector eta;
  int iterations = 0;
  double last_change = 0.0;  ///< sup W_inf between the final two iterates
};

/// Iterates until successive sup-W_inf change drops to `tol` or `max_iters`.
FixedPointResult iterate_to_fixed_point(const DistOperator& op, const Projection& proj,
                                        const DistVector& eta0, double tol, int max_iters);

/// Return distribution eta^pi by projected one-step iteration from delta_0.
DistVector ground_truth_eta(const TabularMDP& mdp, const Policy& pi, int num_atoms = 1000,
                            int iters = 400);

}  // namespace distret
