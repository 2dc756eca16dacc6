#include "distret/learning.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace distret {

double qr_loss(double theta, double tau, const DiracMixture& m) {
  double s = 0.0;
  for (const auto& a : m.atoms()) {
    const double u = a.location - theta;
    s += a.weight * u * (tau - (u < 0.0 ? 1.0 : 0.0));
  }
  return s;
}

double qr_loss_grad(double theta, double tau, const DiracMixture& m) {
  double s = 0.0;
  for (const auto& a : m.atoms()) s += a.weight * ((a.location < theta ? 1.0 : 0.0) - tau);
  return s;
}

namespace {

void push_bootstrap(BackupSpec& spec, const TabularMDP& mdp, const Policy& pi, int next_state, double coef,
                    double shift, double scale, int depth) {
  if (mdp.is_terminal(next_state)) {
    spec.terms.push_back({coef, shift, scale, mdp.index(next_state, 0), depth});
    return;
  }
  for (int b = 0; b < mdp.num_actions(); ++b) {
    const double w = coef * pi(next_state, b);
    if (w != 0.0) spec.terms.push_back({w, shift, scale, mdp.index(next_state, b), depth});
  }
}

Trajectory suffix(const Trajectory& traj, std::size_t from) {
  Trajectory out;
  out.start = {traj.steps[from].state, traj.steps[from].action};
  out.steps.assign(traj.steps.begin() + static_cast<std::ptrdiff_t>(from), traj.steps.end());
  out.terminated = traj.terminated;
  return out;
}

}  // namespace

BackupSpec sampled_retrace_spec(const TabularMDP& mdp, const Trajectory& traj, const Policy& pi,
                                const TraceConfig& trace) {
  BackupSpec spec;
  const double gamma = mdp.gamma();
  double coef = 1.0;  // c_{1:t}
  double g = 0.0;     // G_{0:t-1}
  double gamma_t = 1.0;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const auto& step = traj.steps[t];
    const int depth = static_cast<int>(t);
    if (t > 0) {
      coef *= trace_coeff(trace, step.rho, depth);
      if (coef == 0.0) break;
      spec.terms.push_back({-coef, g, gamma_t, mdp.index(step.state, step.action), depth});
    }
    // At t = 0 the subtracted eta(x_0, a_0) cancels the leading term, so both are omitted.
    g += gamma_t * step.reward;
    gamma_t *= gamma;
    push_bootstrap(spec, mdp, pi, step.next_state, coef, g, gamma_t, depth + 1);
    if (mdp.is_terminal(step.next_state)) break;
  }
  return spec;
}

LossEstimate qr_loss_terms(const BackupSpec& spec, const DistVector& eta, double theta, double tau) {
  LossEstimate out;
  for (const auto& term : spec.terms) {
    for (const auto& a : eta[term.source].atoms()) {
      const double w = term.weight * a.weight;
      const double u = term.shift + term.scale * a.location - theta;
      const double below = u < 0.0 ? 1.0 : 0.0;
      out.loss += w * u * (tau - below);
      out.grad += w * (below - tau);
    }
  }
  return out;
}

LossEstimate stochastic_qr_loss(const TabularMDP& mdp, const Trajectory& traj, const DistVector& eta,
                                const Policy& pi, const TraceConfig& trace, double theta, double tau) {
  return qr_loss_terms(sampled_retrace_spec(mdp, traj, pi, trace), eta, theta, tau);
}

// --- QuantileTable ------------------------------------------------------------

QuantileTable::QuantileTable(int num_states, int num_actions, int num_atoms, double init)
    : num_states_(num_states), num_actions_(num_actions), z_(Eigen::MatrixXd::Constant(num_states * num_actions, num_atoms, init)) {
  if (num_states < 1 || num_actions < 1 || num_atoms < 1) throw parameter_error("QuantileTable: empty shape");
}

void QuantileTable::sort_rows() {
  for (Eigen::Index r = 0; r < z_.rows(); ++r) {
    Eigen::RowVectorXd row = z_.row(r);
    std::sort(row.data(), row.data() + row.size());
    z_.row(r) = row;
  }
}

void QuantileTable::pin_terminals(const TabularMDP& mdp) {
  for (int x = 0; x < mdp.num_states(); ++x)
    if (mdp.is_terminal(x))
      for (int a = 0; a < mdp.num_actions(); ++a) z_.row(mdp.index(x, a)).setConstant(mdp.terminal_value(x));
}

DistVector QuantileTable::to_dist() const {
  DistVector eta(num_states_, num_actions_);
  for (int i = 0; i < eta.num_pairs(); ++i) {
    const Eigen::RowVectorXd row = z_.row(i);
    eta[i] = DiracMixture::uniform(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  return eta;
}

QuantileTable qr_retrace_epoch(const QuantileTable& table, const TabularMDP& mdp, const Policy& pi,
                               const Policy& mu, const TraceConfig& trace, double alpha,
                               int num_trajectories, Rng& rng) {
  if (!(alpha >= 0.0)) throw parameter_error("qr_retrace_epoch: alpha must be non-negative");
  if (num_trajectories < 1) throw parameter_error("qr_retrace_epoch: need at least one trajectory");
  trace.validate();
  QuantileTable snapshot = table;
  snapshot.pin_terminals(mdp);
  const DistVector eta = snapshot.to_dist();
  QuantileTable out = snapshot;
  const int m = table.num_atoms();
  Eigen::VectorXd grad(m);
  for (int pair = 0; pair < mdp.num_pairs(); ++pair) {
    const auto sa = mdp.pair(pair);
    if (mdp.is_terminal(sa.state)) continue;
    grad.setZero();
    for (int k = 0; k < num_trajectories; ++k) {
      const Trajectory traj = sample_trajectory(mdp, pi, mu, sa, trace.horizon + 1, rng);
      const BackupSpec spec = sampled_retrace_spec(mdp, traj, pi, trace);
      for (int i = 0; i < m; ++i) grad[i] += qr_loss_terms(spec, eta, snapshot(pair, i), quantile_level(i, m)).grad;
    }
    out.matrix().row(pair) -= (alpha / num_trajectories) * grad.transpose();
  }
  out.sort_rows();
  return out;
}

double step_size(double alpha0, int epoch, double decay_epochs) {
  return alpha0 / (1.0 + static_cast<double>(epoch) / decay_epochs);
}

// --- categorical --------------------------------------------------------------

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

double ce_against(const Eigen::VectorXd& probs, const Eigen::VectorXd& target) {
  if (probs.size() != target.size()) throw parameter_error("ce_against: size mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (target[i] == 0.0) continue;
    if (!(probs[i] > 0.0)) throw domain_error("cross-entropy: target mass on a zero-probability bin");
    s -= target[i] * std::log(probs[i]);
  }
  return s;
}

double ce_loss(const Eigen::VectorXd& probs, const DiracMixture& m, const Eigen::VectorXd& grid) {
  return ce_against(probs, project_categorical(m, grid).probs);
}

Eigen::VectorXd ce_logit_grad(const Eigen::VectorXd& logits, const Eigen::VectorXd& target) {
  return softmax(logits) * target.sum() - target;
}

Eigen::VectorXd project_terms(const BackupSpec& spec, const DistVector& eta, const Eigen::VectorXd& grid) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(grid.size());
  for (const auto& t : spec.terms) accumulate_categorical(eta[t.source], grid, t.weight, t.shift, t.scale, p);
  return p;
}

CeEstimate stochastic_ce_loss(const TabularMDP& mdp, const Trajectory& traj, const DistVector& eta,
                              const Policy& pi, const TraceConfig& trace, const Eigen::VectorXd& logits,
                              const Eigen::VectorXd& grid) {
  const Eigen::VectorXd target = project_terms(sampled_retrace_spec(mdp, traj, pi, trace), eta, grid);
  return {ce_against(softmax(logits), target), ce_logit_grad(logits, target)};
}

CategoricalTable::CategoricalTable(int num_states, int num_actions, Eigen::VectorXd grid)
    : num_states_(num_states),
      num_actions_(num_actions),
      grid_(std::move(grid)),
      logits_(Eigen::MatrixXd::Zero(num_states * num_actions, grid_.size())) {
  if (num_states < 1 || num_actions < 1) throw parameter_error("CategoricalTable: empty shape");
  if (grid_.size() < 2) throw parameter_error("CategoricalTable: grid needs at least 2 points");
}

DistVector CategoricalTable::to_dist() const {
  DistVector eta(num_states_, num_actions_);
  for (int i = 0; i < eta.num_pairs(); ++i) eta[i] = rep_to_mixture(CategoricalRep{grid_, probs(i)});
  return eta;
}

// --- forward and backward views ------------------------------------------------

QuantileTable forward_view_episode(const QuantileTable& table, const TabularMDP& mdp, const Policy& pi,
                                   const Trajectory& traj, double lambda, double alpha) {
  const DistVector eta = table.to_dist();
  QuantileTable out = table;
  const int m = table.num_atoms();
  const TraceConfig trace = TraceConfig::constant(lambda, std::max<int>(1, static_cast<int>(traj.size())));
  for (std::size_t s = 0; s < traj.size(); ++s) {
    const Trajectory tail = suffix(traj, s);
    const BackupSpec spec = sampled_retrace_spec(mdp, tail, pi, trace);
    const int pair = mdp.index(tail.start);
    for (int i = 0; i < m; ++i)
      out(pair, i) -= alpha * qr_loss_terms(spec, eta, out(pair, i), quantile_level(i, m)).grad;
  }
  return out;
}

QuantileTable backward_view_episode(const QuantileTable& table, const TabularMDP& mdp, const Policy& pi,
                                    const Trajectory& traj, double lambda, double alpha, BackwardStats* stats) {
  struct Anchor {
    int pair;
    double partial_return;  // G_{s:t-1}
    double scale;           // gamma^{t-s}
    double eligibility;     // lambda^{t-s}
  };
  const DistVector eta = table.to_dist();
  QuantileTable out = table;
  const int m = table.num_atoms();
  const double gamma = mdp.gamma();
  std::vector<Anchor> anchors;
  std::size_t peak = 0;
  Eigen::MatrixXd dz(out.matrix().rows(), m);
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const auto& step = traj.steps[t];
    const int current = mdp.index(step.state, step.action);
    anchors.push_back({current, 0.0, 1.0, 1.0});
    peak = std::max(peak, anchors.size());
    dz.setZero();
    for (std::size_t k = 0; k < anchors.size(); ++k) {
      Anchor& an = anchors[k];
      const bool fresh = k + 1 == anchors.size();
      BackupSpec spec;
      const double g_next = an.partial_return + an.scale * step.reward;
      push_bootstrap(spec, mdp, pi, step.next_state, an.eligibility, g_next, an.scale * gamma, 0);
      // The anchor's own first step has no subtracted term: it cancels the
      // prediction being regressed.
      if (!fresh) spec.terms.push_back({-an.eligibility, an.partial_return, an.scale, current, 0});
      for (int i = 0; i < m; ++i)
        dz(an.pair, i) += qr_loss_terms(spec, eta, out(an.pair, i), quantile_level(i, m)).grad;
      an.partial_return = g_next;
      an.scale *= gamma;
      an.eligibility *= lambda;
    }
    out.matrix() -= alpha * dz;
    std::erase_if(anchors, [](const Anchor& an) { return an.eligibility == 0.0; });
    if (mdp.is_terminal(step.next_state)) break;
  }
  if (stats) stats->peak_anchors = peak;
  return out;
}

namespace {

double policy_value(const Eigen::VectorXd& q, const TabularMDP& mdp, const Policy& pi, int x) {
  if (mdp.is_terminal(x)) return mdp.terminal_value(x);
  double v = 0.0;
  for (int b = 0; b < mdp.num_actions(); ++b) v += pi(x, b) * q[mdp.index(x, b)];
  return v;
}

}  // namespace

Eigen::VectorXd value_forward_episode(const Eigen::VectorXd& q, const TabularMDP& mdp, const Policy& pi,
                                      const Trajectory& traj, double lambda, double alpha) {
  Eigen::VectorXd out = q;
  const std::size_t n = traj.size();
  if (n == 0) return out;
  const double gamma = mdp.gamma();
  std::vector<double> ret(n);
  for (std::size_t k = n; k-- > 0;) {
    const auto& step = traj.steps[k];
    double g = step.reward + gamma * policy_value(q, mdp, pi, step.next_state);
    if (k + 1 < n) {
      const auto& next = traj.steps[k + 1];
      g += gamma * lambda * (ret[k + 1] - q[mdp.index(next.state, next.action)]);
    }
    ret[k] = g;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const int i = mdp.index(traj.steps[k].state, traj.steps[k].action);
    out[i] += alpha * (ret[k] - q[i]);
  }
  return out;
}

Eigen::VectorXd value_backward_episode(const Eigen::VectorXd& q, const TabularMDP& mdp, const Policy& pi,
                                       const Trajectory& traj, double lambda, double alpha) {
  Eigen::VectorXd out = q;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(q.size());
  const double gamma = mdp.gamma();
  for (const auto& step : traj.steps) {
    const int i = mdp.index(step.state, step.action);
    e *= gamma * lambda;
    e[i] += 1.0;
    const double delta = step.reward + gamma * policy_value(q, mdp, pi, step.next_state) - q[i];
    out += alpha * delta * e;
  }
  return out;
}

void write_learning_curve(std::ostream& os, const std::vector<CurvePoint>& points) {
  os << "epoch,metric,value,seed\n" << std::setprecision(17);
  for (const auto& p : points) os << p.epoch << ',' << p.metric << ',' << p.value << ',' << p.seed << '\n';
}

}  // namespace distret
