#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "distret/mdp.hpp"
#include "distret/measure.hpp"
#include "distret/operators.hpp"

namespace distret {

// --- quantile regression ------------------------------------------------------

/// sum_i w_i f_tau(z_i - theta) with f_tau(u) = u (tau - 1[u < 0]).
double qr_loss(double theta, double tau, const DiracMixture& m);

/// sum_i w_i (1[z_i < theta] - tau). The indicator is strict: at an atom this
/// is the left derivative.
double qr_loss_grad(double theta, double tau, const DiracMixture& m);

struct LossEstimate {
  double loss = 0.0;
  double grad = 0.0;
};

/// Single-trajectory Retrace target as signed pushforward terms:
///   eta(x_0, a_0) + sum_t c_{1:t} Delta~_{0:t},
/// with the bootstrap at each step mixed over the target policy. Steps past the
/// end of the trajectory or past the trace horizon contribute nothing.
BackupSpec sampled_retrace_spec(const TabularMDP& mdp, const Trajectory& traj, const Policy& pi,
                                const TraceConfig& trace);

/// QR loss and gradient against a term list, without materializing the mixture.
LossEstimate qr_loss_terms(const BackupSpec& spec, const DistVector& eta, double theta, double tau);

/// Unbiased single-trajectory estimate of the QR loss against the Retrace
/// target at traj.start, and its theta-gradient.
LossEstimate stochastic_qr_loss(const TabularMDP& mdp, const Trajectory& traj, const DistVector& eta,
                                const Policy& pi, const TraceConfig& trace, double theta, double tau);

/// Quantile locations per pair, one row per TabularMDP::index.
class QuantileTable {
 public:
  QuantileTable() = default;
  QuantileTable(int num_states, int num_actions, int num_atoms, double init = 0.0);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int num_atoms() const { return static_cast<int>(z_.cols()); }

  double& operator()(int pair, int i) { return z_(pair, i); }
  double operator()(int pair, int i) const { return z_(pair, i); }
  Eigen::MatrixXd& matrix() { return z_; }
  const Eigen::MatrixXd& matrix() const { return z_; }

  void sort_rows();
  void pin_terminals(const TabularMDP& mdp);
  DistVector to_dist() const;

  friend bool operator==(const QuantileTable& l, const QuantileTable& r) {
    return l.num_states_ == r.num_states_ && l.num_actions_ == r.num_actions_ && l.z_ == r.z_;
  }

 private:
  int num_states_ = 0;
  int num_actions_ = 0;
  Eigen::MatrixXd z_;
};

/// One synchronous epoch: for every non-terminal pair, the QR gradients of
/// `num_trajectories` sampled Retrace estimates against a snapshot of the
/// table are averaged and applied. Rows are sorted afterwards.
QuantileTable qr_retrace_epoch(const QuantileTable& table, const TabularMDP& mdp, const Policy& pi,
                               const Policy& mu, const TraceConfig& trace, double alpha,
                               int num_trajectories, Rng& rng);

/// alpha_k = alpha0 / (1 + k / decay_epochs).
double step_size(double alpha0, int epoch, double decay_epochs = 100.0);

// --- categorical --------------------------------------------------------------

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

/// -sum_i (Pi_C m)_i log q_i; linear in m, so signed m is allowed.
double ce_loss(const Eigen::VectorXd& probs, const DiracMixture& m, const Eigen::VectorXd& grid);

/// -sum_i p_i log q_i for an already projected (possibly signed) target p.
double ce_against(const Eigen::VectorXd& probs, const Eigen::VectorXd& target);

/// Gradient of ce_against(softmax(logits), target) in the logits: q sum(p) - p.
Eigen::VectorXd ce_logit_grad(const Eigen::VectorXd& logits, const Eigen::VectorXd& target);

/// Sum over terms of w * Pi_C((b_{shift, scale})_# eta(source)).
Eigen::VectorXd project_terms(const BackupSpec& spec, const DistVector& eta, const Eigen::VectorXd& grid);

struct CeEstimate {
  double loss = 0.0;
  Eigen::VectorXd logit_grad;
};

/// Single-trajectory CE estimate against the projected Retrace target.
CeEstimate stochastic_ce_loss(const TabularMDP& mdp, const Trajectory& traj, const DistVector& eta,
                              const Policy& pi, const TraceConfig& trace, const Eigen::VectorXd& logits,
                              const Eigen::VectorXd& grid);

/// Logits over a fixed grid, one row per pair.
class CategoricalTable {
 public:
  CategoricalTable(int num_states, int num_actions, Eigen::VectorXd grid);

  const Eigen::VectorXd& grid() const { return grid_; }
  Eigen::MatrixXd& logits() { return logits_; }
  const Eigen::MatrixXd& logits() const { return logits_; }
  Eigen::VectorXd probs(int pair) const { return softmax(logits_.row(pair).transpose()); }
  DistVector to_dist() const;

 private:
  int num_states_;
  int num_actions_;
  Eigen::VectorXd grid_;
  Eigen::MatrixXd logits_;
};

// --- forward and backward views ------------------------------------------------

/// One QR step per visited pair against its truncated on-policy Retrace target
/// (c_t = lambda) built from the remainder of the episode. Bootstraps read the
/// table as it was at episode start.
QuantileTable forward_view_episode(const QuantileTable& table, const TabularMDP& mdp, const Policy& pi,
                                   const Trajectory& traj, double lambda, double alpha);

struct BackwardStats {
  std::size_t peak_anchors = 0;
};

/// Incremental version: every past visit keeps a partial return G_{s:t} and an
/// eligibility lambda^{t-s}, and receives the gradient of its share of each new
/// TD error at the current parameters.
QuantileTable backward_view_episode(const QuantileTable& table, const TabularMDP& mdp, const Policy& pi,
                                    const Trajectory& traj, double lambda, double alpha,
                                    BackwardStats* stats = nullptr);

/// Q(x_s, a_s) += alpha (G^lambda_s - Q(x_s, a_s)) per visit, targets from the
/// episode-start table.
Eigen::VectorXd value_forward_episode(const Eigen::VectorXd& q, const TabularMDP& mdp, const Policy& pi,
                                      const Trajectory& traj, double lambda, double alpha);

/// Accumulating traces e <- gamma lambda e + 1[visit]; Q += alpha e delta_t.
Eigen::VectorXd value_backward_episode(const Eigen::VectorXd& q, const TabularMDP& mdp, const Policy& pi,
                                       const Trajectory& traj, double lambda, double alpha);

// --- logging ------------------------------------------------------------------

struct CurvePoint {
  int epoch = 0;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
};

void write_learning_curve(std::ostream& os, const std::vector<CurvePoint>& points);

}  // namespace distret
