#include "distret/operators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <tuple>

#include <Eigen/LU>

namespace distret {

// --- DistVector ---------------------------------------------------------------

DistVector::DistVector(int num_states, int num_actions, const DiracMixture& fill)
    : num_states_(num_states),
      num_actions_(num_actions),
      entries_(static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions), fill) {
  if (num_states < 1 || num_actions < 1) throw parameter_error("DistVector: empty shape");
}

bool DistVector::is_probability() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const DiracMixture& m) { return m.is_probability(); });
}

void apply_terminal_values(const TabularMDP& mdp, DistVector& eta) {
  for (int x = 0; x < mdp.num_states(); ++x) {
    if (!mdp.is_terminal(x)) continue;
    for (int a = 0; a < mdp.num_actions(); ++a) eta.at(x, a) = DiracMixture::dirac(mdp.terminal_value(x));
  }
}

DistVector constant_dist_vector(const TabularMDP& mdp, const DiracMixture& m) {
  DistVector eta(mdp.num_states(), mdp.num_actions(), m);
  apply_terminal_values(mdp, eta);
  return eta;
}

Eigen::VectorXd mean_vector(const DistVector& eta) {
  Eigen::VectorXd q(eta.num_pairs());
  for (int i = 0; i < eta.num_pairs(); ++i) q[i] = eta[i].mean();
  return q;
}

double sup_distance(const DistVector& a, const DistVector& b, Metric metric, double p) {
  return sup_metric(a.entries(), b.entries(), metric, p);
}

// --- specs ------------------------------------------------------------------

double BackupSpec::total_weight() const {
  double s = tail_mass;
  for (const auto& t : terms) s += t.weight;
  return s;
}

double BackupSpec::weighted_scale() const {
  double s = 0.0;
  for (const auto& t : terms) s += t.weight * t.scale;
  return s;
}

DiracMixture apply_backup(const BackupSpec& spec, const DistVector& eta) {
  std::size_t n = 0;
  for (const auto& t : spec.terms) n += eta[t.source].size();
  std::vector<Atom> atoms;
  atoms.reserve(n);
  std::vector<std::size_t> run_ends;
  run_ends.reserve(spec.terms.size() + 1);
  for (const auto& t : spec.terms) {
    if (t.scale < 0.0) throw domain_error("apply_backup: term scale must be non-negative");
    for (const auto& a : eta[t.source].atoms()) atoms.push_back({t.shift + t.scale * a.location, t.weight * a.weight});
    run_ends.push_back(atoms.size());
  }
  if (run_ends.empty() || run_ends.back() != atoms.size()) run_ends.push_back(atoms.size());
  return DiracMixture::from_sorted_runs(std::move(atoms), std::move(run_ends));
}

namespace {

/// Accumulates terms keyed by (depth, source, shift, scale) so that paths
/// reaching the same pushforward collapse into one term. Duplicates are summed
/// in insertion order.
class SpecBuilder {
 public:
  struct Entry {
    int depth;
    int source;
    double shift;
    double scale;
    double weight;
    std::tuple<const int&, const int&, const double&, const double&> key() const { return std::tie(depth, source, shift, scale); }
  };

  explicit SpecBuilder(double gamma) : gamma_(gamma) {}

  void add(double weight, double shift, int depth, int source) {
    if (weight == 0.0) return;
    entries_.push_back({depth, source, shift, std::pow(gamma_, depth), weight});
  }
  void add_scaled(double weight, double shift, double scale, int depth, int source) {
    if (weight == 0.0) return;
    entries_.push_back({depth, source, shift, scale, weight});
  }

  BackupSpec build() {
    std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& l, const Entry& r) { return l.key() < r.key(); });
    BackupSpec spec;
    for (std::size_t i = 0; i < entries_.size();) {
      std::size_t j = i;
      double w = 0.0;
      for (; j < entries_.size() && entries_[j].key() == entries_[i].key(); ++j) w += entries_[j].weight;
      if (w != 0.0) spec.terms.push_back({w, entries_[i].shift, entries_[i].scale, entries_[i].source, entries_[i].depth});
      i = j;
    }
    return spec;
  }

 private:
  double gamma_;
  std::vector<Entry> entries_;
};

void check_shapes(const TabularMDP& mdp, const Policy& pi, const Policy& mu) {
  if (pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions() ||
      mu.num_states() != mdp.num_states() || mu.num_actions() != mdp.num_actions())
    throw parameter_error("policy shape does not match the MDP");
}

void check_pair(const TabularMDP& mdp, int x, int a) {
  if (x < 0 || x >= mdp.num_states() || a < 0 || a >= mdp.num_actions())
    throw parameter_error("state-action pair out of range");
}

/// c_t at (y, b) when b is drawn from mu; zero where mu has no mass.
double coeff_at(const TraceConfig& trace, const Policy& pi, const Policy& mu, int y, int b, int t) {
  if (mu(y, b) <= 0.0) return 0.0;
  return trace_coeff(trace, pi(y, b) / mu(y, b), t);
}

/// Visits every (reward, next state) branch of (x, a) with its probability.
template <class F>
void for_each_branch(const TabularMDP& mdp, int x, int a, F&& f) {
  const auto row = mdp.transition(x, a);
  for (const auto& r : mdp.rewards(x, a)) {
    if (r.prob <= 0.0) continue;
    for (int y = 0; y < mdp.num_states(); ++y) {
      const double p = row[y];
      if (p <= 0.0) continue;
      f(r.value, y, r.prob * p);
    }
  }
}

}  // namespace

BackupSpec bellman_spec(const TabularMDP& mdp, const Policy& pi, int x, int a) {
  check_pair(mdp, x, a);
  SpecBuilder b(mdp.gamma());
  for_each_branch(mdp, x, a, [&](double r, int y, double p) {
    if (mdp.is_terminal(y)) {
      b.add(p, r, 1, mdp.index(y, 0));
      return;
    }
    for (int bb = 0; bb < mdp.num_actions(); ++bb) b.add(p * pi(y, bb), r, 1, mdp.index(y, bb));
  });
  return b.build();
}

BackupSpec retrace_decompose(const TabularMDP& mdp, const Policy& pi, const Policy& mu,
                             const TraceConfig& trace, int x, int a) {
  check_shapes(mdp, pi, mu);
  check_pair(mdp, x, a);
  trace.validate();
  const double gamma = mdp.gamma();
  const bool convex = trace.guarantees_retrace_condition();
  SpecBuilder out(gamma);

  // Node: pair (x_t, a_t) reached with weight P_mu(path) * c_{1:t} and partial
  // return G_{0:t-1}; gamma_t = gamma^t.
  std::function<void(int, int, int, double, double, double)> visit =
      [&](int xt, int at, int t, double weight, double g, double gamma_t) {
        for_each_branch(mdp, xt, at, [&](double r, int y, double p) {
          const double w = weight * p;
          const double g_next = g + gamma_t * r;
          const int t_next = t + 1;
          if (mdp.is_terminal(y)) {
            out.add(w, g_next, t_next, mdp.index(y, 0));
            return;
          }
          for (int b = 0; b < mdp.num_actions(); ++b) {
            const double c = coeff_at(trace, pi, mu, y, b, t_next);
            double v = pi(y, b) - mu(y, b) * c;
            if (convex) v = std::max(v, 0.0);  // c <= rho; clamp rounding only
            out.add(w * v, g_next, t_next, mdp.index(y, b));
            if (c != 0.0) visit(y, b, t_next, w * mu(y, b) * c, g_next, gamma_t * gamma);
          }
        });
      };
  if (!mdp.is_terminal(x)) visit(x, a, 0, 1.0, 0.0, 1.0);
  return out.build();
}

namespace {

/// mu-path enumeration to depth n; `shift_of` maps (G, rho product) to the
/// pushforward shift.
template <class ShiftFn>
BackupSpec nstep_spec(const TabularMDP& mdp, const Policy& pi, const Policy& mu, int n, int x, int a,
                      ShiftFn shift_of) {
  check_shapes(mdp, pi, mu);
  check_pair(mdp, x, a);
  if (n < 1) throw parameter_error("n-step operator: n must be >= 1");
  const double gamma = mdp.gamma();
  SpecBuilder out(gamma);
  std::function<void(int, int, int, double, double, double, double)> visit =
      [&](int xt, int at, int t, double prob, double g, double gamma_t, double rho_prod) {
        for_each_branch(mdp, xt, at, [&](double r, int y, double p) {
          const double w = prob * p;
          const double g_next = g + gamma_t * r;
          const int t_next = t + 1;
          if (mdp.is_terminal(y)) {
            out.add(w, shift_of(g_next, rho_prod), t_next, mdp.index(y, 0));
            return;
          }
          if (t_next == n) {
            for (int b = 0; b < mdp.num_actions(); ++b)
              out.add(w * pi(y, b), shift_of(g_next, rho_prod), t_next, mdp.index(y, b));
            return;
          }
          for (int b = 0; b < mdp.num_actions(); ++b) {
            if (mu(y, b) <= 0.0) continue;
            visit(y, b, t_next, w * mu(y, b), g_next, gamma_t * gamma, rho_prod * pi(y, b) / mu(y, b));
          }
        });
      };
  if (!mdp.is_terminal(x)) visit(x, a, 0, 1.0, 0.0, 1.0, 1.0);
  return out.build();
}

}  // namespace

BackupSpec uncorrected_spec(const TabularMDP& mdp, const Policy& pi, const Policy& mu, int n, int x, int a) {
  return nstep_spec(mdp, pi, mu, n, x, a, [](double g, double) { return g; });
}

BackupSpec is_on_return_spec(const TabularMDP& mdp, const Policy& pi, const Policy& mu, int n, int x,
                             int a) {
  return nstep_spec(mdp, pi, mu, n, x, a, [](double g, double rho) { return rho * g; });
}

namespace {

/// W_t(y, b) = E_mu[c_{1:t} 1[X_t = y, A_t = b]] for t = 0..horizon, starting
/// from the point mass at (x, a).
std::vector<Eigen::VectorXd> trace_occupancy(const TabularMDP& mdp, const Policy& pi, const Policy& mu,
                                             const TraceConfig& trace, int x, int a) {
  std::vector<Eigen::VectorXd> occ;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(mdp.num_pairs());
  if (mdp.is_terminal(x)) return occ;
  w[mdp.index(x, a)] = 1.0;
  occ.push_back(w);
  for (int t = 1; t <= trace.horizon; ++t) {
    const Eigen::RowVectorXd next_state = w.transpose() * mdp.transitions();
    Eigen::VectorXd nw = Eigen::VectorXd::Zero(mdp.num_pairs());
    for (int y = 0; y < mdp.num_states(); ++y) {
      if (mdp.is_terminal(y) || next_state[y] == 0.0) continue;
      for (int b = 0; b < mdp.num_actions(); ++b)
        nw[mdp.index(y, b)] = next_state[y] * mu(y, b) * coeff_at(trace, pi, mu, y, b, t);
    }
    if (nw.isZero(0.0)) break;
    w = nw;
    occ.push_back(w);
  }
  return occ;
}

/// Shared layout of the two path-independent operators. `pos` and `neg` emit
/// the bootstrap and the subtracted term of c_{1:t} Delta_t.
template <class Pos, class Neg>
BackupSpec path_independent_spec(const TabularMDP& mdp, const Policy& pi, const Policy& mu,
                                 const TraceConfig& trace, int x, int a, Pos pos, Neg neg) {
  check_shapes(mdp, pi, mu);
  check_pair(mdp, x, a);
  trace.validate();
  SpecBuilder out(mdp.gamma());
  const auto occ = trace_occupancy(mdp, pi, mu, trace, x, a);
  for (std::size_t t = 0; t < occ.size(); ++t) {
    const int depth = static_cast<int>(t);
    for (int i = 0; i < mdp.num_pairs(); ++i) {
      const double w = occ[t][i];
      if (w == 0.0) continue;
      const auto [xt, at] = mdp.pair(i);
      // The t = 0 subtracted term cancels the leading eta(x, a).
      if (t > 0) neg(out, w, depth, i);
      for_each_branch(mdp, xt, at, [&](double r, int y, double p) {
        if (mdp.is_terminal(y)) {
          pos(out, w * p, r, depth, mdp.index(y, 0));
          return;
        }
        for (int b = 0; b < mdp.num_actions(); ++b) pos(out, w * p * pi(y, b), r, depth, mdp.index(y, b));
      });
    }
  }
  return out.build();
}

}  // namespace

BackupSpec alt_bar_spec(const TabularMDP& mdp, const Policy& pi, const Policy& mu,
                        const TraceConfig& trace, int x, int a) {
  const double gamma = mdp.gamma();
  return path_independent_spec(
      mdp, pi, mu, trace, x, a,
      [gamma](SpecBuilder& out, double w, double r, int t, int src) {
        out.add(w, std::pow(gamma, t) * r, t + 1, src);
      },
      [](SpecBuilder& out, double w, int t, int src) { out.add(-w, 0.0, t, src); });
}

BackupSpec alt_tilde_spec(const TabularMDP& mdp, const Policy& pi, const Policy& mu,
                          const TraceConfig& trace, int x, int a) {
  const double gamma = mdp.gamma();
  return path_independent_spec(
      mdp, pi, mu, trace, x, a,
      [gamma](SpecBuilder& out, double w, double r, int t, int src) {
        out.add_scaled(std::pow(gamma, t) * w, r, gamma, 1, src);
      },
      [gamma](SpecBuilder& out, double w, int t, int src) {
        out.add_scaled(-std::pow(gamma, t) * w, 0.0, 1.0, 0, src);
      });
}

DiracMixture bellman_backup(const DistVector& eta, const TabularMDP& mdp, const Policy& pi, int x, int a) {
  if (mdp.is_terminal(x)) return DiracMixture::dirac(mdp.terminal_value(x));
  return apply_backup(bellman_spec(mdp, pi, x, a), eta);
}

DiracMixture retrace_backup(const DistVector& eta, const TabularMDP& mdp, const Policy& pi,
                            const Policy& mu, const TraceConfig& trace, int x, int a) {
  if (mdp.is_terminal(x)) return DiracMixture::dirac(mdp.terminal_value(x));
  return apply_backup(retrace_decompose(mdp, pi, mu, trace, x, a), eta);
}

DiracMixture uncorrected_nstep_backup(const DistVector& eta, const TabularMDP& mdp, const Policy& pi,
                                      const Policy& mu, int n, int x, int a) {
  if (mdp.is_terminal(x)) return DiracMixture::dirac(mdp.terminal_value(x));
  return apply_backup(uncorrected_spec(mdp, pi, mu, n, x, a), eta);
}

DiracMixture alt_bar_backup(const DistVector& eta, const TabularMDP& mdp, const Policy& pi,
                            const Policy& mu, const TraceConfig& trace, int x, int a) {
  if (mdp.is_terminal(x)) return DiracMixture::dirac(mdp.terminal_value(x));
  return apply_backup(alt_bar_spec(mdp, pi, mu, trace, x, a), eta);
}

DiracMixture alt_tilde_backup(const DistVector& eta, const TabularMDP& mdp, const Policy& pi,
                              const Policy& mu, const TraceConfig& trace, int x, int a) {
  if (mdp.is_terminal(x)) return DiracMixture::dirac(mdp.terminal_value(x));
  return apply_backup(alt_tilde_spec(mdp, pi, mu, trace, x, a), eta);
}

// --- value-based ------------------------------------------------------------

namespace {

Eigen::VectorXd state_values(const Eigen::VectorXd& q, const TabularMDP& mdp, const Policy& pi) {
  Eigen::VectorXd v(mdp.num_states());
  for (int y = 0; y < mdp.num_states(); ++y) {
    if (mdp.is_terminal(y)) {
      v[y] = mdp.terminal_value(y);
      continue;
    }
    double s = 0.0;
    for (int b = 0; b < mdp.num_actions(); ++b) s += pi(y, b) * q[mdp.index(y, b)];
    v[y] = s;
  }
  return v;
}

}  // namespace

double value_retrace_backup(const Eigen::VectorXd& q, const TabularMDP& mdp, const Policy& pi,
                            const Policy& mu, const TraceConfig& trace, int x, int a) {
  check_shapes(mdp, pi, mu);
  check_pair(mdp, x, a);
  if (q.size() != mdp.num_pairs()) throw parameter_error("value_retrace_backup: Q has the wrong size");
  trace.validate();
  if (mdp.is_terminal(x)) return mdp.terminal_value(x);
  const Eigen::VectorXd v = state_values(q, mdp, pi);
  Eigen::VectorXd td(mdp.num_pairs());
  for (int i = 0; i < mdp.num_pairs(); ++i) {
    const auto [xi, ai] = mdp.pair(i);
    td[i] = mdp.mean_reward(xi, ai) + mdp.gamma() * mdp.transition(xi, ai).dot(v) - q[i];
  }
  double target = q[mdp.index(x, a)];
  double gamma_t = 1.0;
  for (const auto& w : trace_occupancy(mdp, pi, mu, trace, x, a)) {
    target += gamma_t * w.dot(td);
    gamma_t *= mdp.gamma();
  }
  return target;
}

Eigen::VectorXd value_retrace(const Eigen::VectorXd& q, const TabularMDP& mdp, const Policy& pi,
                              const Policy& mu, const TraceConfig& trace) {
  Eigen::VectorXd out(mdp.num_pairs());
  for (int i = 0; i < mdp.num_pairs(); ++i) {
    const auto [x, a] = mdp.pair(i);
    out[i] = value_retrace_backup(q, mdp, pi, mu, trace, x, a);
  }
  return out;
}

Eigen::VectorXd q_values(const TabularMDP& mdp, const Policy& pi) {
  const int n = mdp.num_pairs();
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) {
    const auto [x, a] = mdp.pair(i);
    if (mdp.is_terminal(x)) {
      rhs[i] = mdp.terminal_value(x);
      continue;
    }
    rhs[i] = mdp.mean_reward(x, a);
    for (int y = 0; y < mdp.num_states(); ++y) {
      const double p = mdp.transition(x, a)[y];
      if (p == 0.0) continue;
      if (mdp.is_terminal(y)) {
        rhs[i] += mdp.gamma() * p * mdp.terminal_value(y);
        continue;
      }
      for (int b = 0; b < mdp.num_actions(); ++b) lhs(i, mdp.index(y, b)) -= mdp.gamma() * p * pi(y, b);
    }
  }
  return lhs.partialPivLu().solve(rhs);
}

ContractionRate contraction_rate(const TabularMDP& mdp, const Policy& pi, const Policy& mu,
                                 const TraceConfig& trace) {
  check_shapes(mdp, pi, mu);
  trace.validate();
  const bool convex = trace.guarantees_retrace_condition();
  const double gamma = mdp.gamma();
  ContractionRate out;
  out.tail_bound = std::pow(gamma, trace.horizon + 1);
  // retrace_decompose(...).weighted_scale() with the shifts marginalized out:
  // the depth-(t+1) weight mass only depends on the c-weighted occupancy at t.
  for (int i = 0; i < mdp.num_pairs(); ++i) {
    const auto [x, a] = mdp.pair(i);
    if (mdp.is_terminal(x)) continue;
    const auto occ = trace_occupancy(mdp, pi, mu, trace, x, a);
    double total = 0.0;
    double gamma_t = gamma;
    for (std::size_t t = 0; t < occ.size(); ++t, gamma_t *= gamma) {
      const int t_next = static_cast<int>(t) + 1;
      const Eigen::RowVectorXd next_state = occ[t].transpose() * mdp.transitions();
      for (int y = 0; y < mdp.num_states(); ++y) {
        if (next_state[y] == 0.0) continue;
        if (mdp.is_terminal(y)) {
          total += gamma_t * next_state[y];
          continue;
        }
        for (int b = 0; b < mdp.num_actions(); ++b) {
          double v = pi(y, b) - mu(y, b) * coeff_at(trace, pi, mu, y, b, t_next);
          if (convex) v = std::max(v, 0.0);
          total += gamma_t * next_state[y] * v;
        }
      }
    }
    out.beta = std::max(out.beta, total);
  }
  return out;
}

// --- whole-table operators ----------------------------------------------------

std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::bellman: return "bellman";
    case OperatorKind::retrace: return "retrace";
    case OperatorKind::uncorrected: return "uncorrected";
    case OperatorKind::alt_bar: return "alt_bar";
    case OperatorKind::alt_tilde: return "alt_tilde";
    case OperatorKind::is_on_return: return "is_on_return";
  }
  return "unknown";
}

OperatorKind operator_kind_from_string(const std::string& name) {
  for (auto k : {OperatorKind::bellman, OperatorKind::retrace, OperatorKind::uncorrected, OperatorKind::alt_bar,
                 OperatorKind::alt_tilde, OperatorKind::is_on_return})
    if (to_string(k) == name) return k;
  throw parameter_error("unknown operator: " + name);
}

std::string Projection::describe() const {
  switch (kind) {
    case Kind::none: return "none";
    case Kind::quantile: return "quantile(" + std::to_string(num_atoms) + ")";
    case Kind::categorical: return "categorical(" + std::to_string(num_atoms) + ")";
  }
  return "unknown";
}

DistOperator::DistOperator(OperatorKind kind, const TabularMDP& mdp, const Policy& pi, const Policy& mu,
                           const TraceConfig& trace, int n)
    : kind_(kind),
      num_states_(mdp.num_states()),
      num_actions_(mdp.num_actions()),
      terminal_(mdp.terminal_values()) {
  specs_.reserve(static_cast<std::size_t>(mdp.num_pairs()));
  for (int i = 0; i < mdp.num_pairs(); ++i) {
    const auto [x, a] = mdp.pair(i);
    if (mdp.is_terminal(x)) {
      specs_.emplace_back();
      continue;
    }
    switch (kind) {
      case OperatorKind::bellman: specs_.push_back(bellman_spec(mdp, pi, x, a)); break;
      case OperatorKind::retrace: specs_.push_back(retrace_decompose(mdp, pi, mu, trace, x, a)); break;
      case OperatorKind::uncorrected: specs_.push_back(uncorrected_spec(mdp, pi, mu, n, x, a)); break;
      case OperatorKind::alt_bar: specs_.push_back(alt_bar_spec(mdp, pi, mu, trace, x, a)); break;
      case OperatorKind::alt_tilde: specs_.push_back(alt_tilde_spec(mdp, pi, mu, trace, x, a)); break;
      case OperatorKind::is_on_return: specs_.push_back(is_on_return_spec(mdp, pi, mu, n, x, a)); break;
    }
  }
}

DistVector DistOperator::operator()(const DistVector& eta, const Projection& proj) const {
  if (eta.num_states() != num_states_ || eta.num_actions() != num_actions_)
    throw parameter_error("DistOperator: input shape does not match the MDP");
  DistVector out(num_states_, num_actions_);
  for (int i = 0; i < eta.num_pairs(); ++i) {
    const int x = i / num_actions_;
    if (terminal_[static_cast<std::size_t>(x)]) {
      out[i] = DiracMixture::dirac(*terminal_[static_cast<std::size_t>(x)]);
      continue;
    }
    const auto& spec = specs_[static_cast<std::size_t>(i)];
    switch (proj.kind) {
      case Projection::Kind::none: out[i] = compress(apply_backup(spec, eta), 1e-12); break;
      case Projection::Kind::quantile:
        out[i] = rep_to_mixture(project_quantile(apply_backup(spec, eta), proj.num_atoms));
        break;
      case Projection::Kind::categorical: {
        CategoricalRep rep{proj.grid, Eigen::VectorXd::Zero(proj.grid.size())};
        for (const auto& t : spec.terms)
          accumulate_categorical(eta[t.source], proj.grid, t.weight, t.shift, t.scale, rep.probs);
        out[i] = rep_to_mixture(rep);
        break;
      }
    }
  }
  return out;
}

DistanceSpec parse_distance(const std::string& name) {
  if (name.size() < 2 || (name[0] != 'W' && name[0] != 'L'))
    throw parameter_error("unknown distance: " + name);
  const Metric metric = name[0] == 'W' ? Metric::wasserstein : Metric::cramer;
  const std::string order = name.substr(1);
  double p = 0.0;
  if (order == "inf") {
    if (metric == Metric::cramer) throw parameter_error("L_inf is not supported");
    p = kInfinity;
  } else {
    try {
      std::size_t used = 0;
      p = std::stod(order, &used);
      if (used != order.size()) throw parameter_error("");
    } catch (const std::exception&) {
      throw parameter_error("unknown distance: " + name);
    }
    if (!(p >= 1.0)) throw parameter_error("distance order must be >= 1: " + name);
  }
  return {name, metric, p};
}

IterateLog dp_iterate(const DistOperator& op, const Projection& proj, const DistVector& eta0, int iters,
                      std::span<const Reference> references, std::span<const DistanceSpec> distances) {
  if (iters < 0) throw parameter_error("dp_iterate: iters must be >= 0");
  IterateLog log;
  log.iterates.reserve(static_cast<std::size_t>(iters) + 1);
  log.iterates.push_back(eta0);
  auto record = [&](int k) {
    for (const auto& ref : references)
      for (const auto& d : distances)
        log.rows.push_back({k, d.name, ref.name, sup_distance(log.iterates.back(), ref.eta, d.metric, d.p)});
  };
  record(0);
  Projection active = proj;
  for (int k = 1; k <= iters; ++k) {
    DistVector next = op(log.iterates.back(), active);
    if (active.kind == Projection::Kind::none && active.max_atoms > 0) {
      std::size_t largest = 0;
      double lo = kInfinity, hi = -kInfinity;
      for (const auto& m : next.entries()) {
        largest = std::max(largest, m.size());
        if (m.empty()) continue;
        lo = std::min(lo, m.atoms().front().location);
        hi = std::max(hi, m.atoms().back().location);
      }
      if (largest > active.max_atoms) {
        if (!(hi > lo)) hi = lo + 1.0;
        log.fallback_grid = Eigen::VectorXd::LinSpaced(active.fallback_points, lo, hi);
        log.first_gridded = k;
        for (int i = 0; i < next.num_pairs(); ++i)
          next[i] = rep_to_mixture(project_categorical(next[i], log.fallback_grid));
        active = Projection::categorical(log.fallback_grid);
      }
    }
    log.iterates.push_back(std::move(next));
    record(k);
  }
  return log;
}

void write_iterate_csv(std::ostream& os, const IterateLog& log) {
  os << "iteration,metric_name,reference_name,value\n";
  os << std::setprecision(17);
  for (const auto& r : log.rows) os << r.iteration << ',' << r.metric_name << ',' << r.reference_name << ',' << r.value << '\n';
}

FixedPointResult iterate_to_fixed_point(const DistOperator& op, const Projection& proj,
                                        const DistVector& eta0, double tol, int max_iters) {
  FixedPointResult res{eta0, 0, kInfinity};
  while (res.iterations < max_iters) {
    DistVector next = op(res.eta, proj);
    res.last_change = sup_distance(next, res.eta, Metric::wasserstein, kInfinity);
    res.eta = std::move(next);
    ++res.iterations;
    if (res.last_change <= tol) break;
  }
  return res;
}

DistVector ground_truth_eta(const TabularMDP& mdp, const Policy& pi, int num_atoms, int iters) {
  const DistOperator op(OperatorKind::bellman, mdp, pi, pi, TraceConfig::constant(0.0, 1));
  DistVector eta = constant_dist_vector(mdp, DiracMixture::dirac(0.0));
  const Projection proj = Projection::quantile(num_atoms);
  for (int k = 0; k < iters; ++k) eta = op(eta, proj);
  return eta;
}

}  // namespace distret
