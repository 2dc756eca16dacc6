#include "distret/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "distret/learning.hpp"

#ifndef DISTRET_VERSION
#define DISTRET_VERSION "dev"
#endif

namespace distret {

std::string library_version() { return DISTRET_VERSION; }

bool RunResult::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int workers = std::clamp(jobs, 1, n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string metric_name(double p) { return std::isinf(p) ? "Winf" : "L" + num(p); }

void write_header(std::ostream& os, const std::string& command, const ExperimentConfig& cfg,
                  const std::vector<std::string>& diagnostics = {}) {
  os << "# distret " << library_version() << '\n';
  os << "# command=" << command << '\n';
  for (const auto& [k, v] : cfg.entries()) os << "# " << k << '=' << v << '\n';
  for (const auto& d : diagnostics) os << "# " << d << '\n';
}

void write_checks(std::ostream& os, const std::vector<Check>& checks) {
  for (const auto& c : checks) os << "# check " << c.name << '=' << (c.passed ? "PASS" : "FAIL") << ' ' << c.detail << '\n';
}

RunResult finish(std::ostringstream& body, std::vector<Check> checks) {
  write_checks(body, checks);
  return {body.str(), std::move(checks)};
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Projection of the ground-truth table onto the sweep representation.
DistVector project_reference(const ExperimentConfig& cfg, const TabularMDP& mdp, const DistVector& truth) {
  const Projection proj = sweep_projection(cfg, mdp);
  DistVector out = truth;
  for (int i = 0; i < out.num_pairs(); ++i) {
    if (proj.kind == Projection::Kind::quantile)
      out[i] = rep_to_mixture(project_quantile(truth[i], proj.num_atoms));
    else if (proj.kind == Projection::Kind::categorical)
      out[i] = rep_to_mixture(project_categorical(truth[i], proj.grid));
  }
  apply_terminal_values(mdp, out);
  return out;
}

Check monotone_check(const std::string& name, const std::vector<double>& keys, const std::vector<double>& values,
                     bool increasing, double tol = 1e-12) {
  std::ostringstream d;
  bool ok = true;
  for (std::size_t j = 0; j < values.size(); ++j) {
    d << (j ? " " : "") << num(keys[j]) << ':' << num(values[j]);
    if (j == 0) continue;
    ok = ok && (increasing ? values[j] >= values[j - 1] - tol : values[j] <= values[j - 1] + tol);
  }
  return {name, ok, d.str()};
}

}  // namespace

// --- shared sweep pieces ----------------------------------------------------------

TabularMDP sweep_mdp(const ExperimentConfig& cfg, int index) {
  if (cfg.mdp == "random") {
    const std::uint64_t seed = Rng(cfg.seed).split("mdp").split(static_cast<std::uint64_t>(index)).seed();
    return make_random_mdp(seed, cfg.num_states, cfg.num_actions, cfg.dirichlet, cfg.gamma);
  }
  if (cfg.mdp == "counterexample") return make_counterexample_mdp(cfg.gamma);
  if (cfg.mdp == "chain3") return make_chain3_mdp(cfg.gamma);
  if (cfg.mdp == "file") return load_mdp(cfg.mdp_file);
  throw parameter_error("config: unknown mdp '" + cfg.mdp + "'");
}

Policy sweep_target(const ExperimentConfig& cfg, const TabularMDP& mdp, int index, double eps) {
  Rng rng = Rng(cfg.seed).split("target").split(static_cast<std::uint64_t>(index));
  const Policy mu = uniform_policy(mdp.num_states(), mdp.num_actions());
  const Policy pi_d = random_deterministic_policy(mdp.num_states(), mdp.num_actions(), rng);
  return mix_policy(pi_d, mu, eps, cfg.convention());
}

Projection sweep_projection(const ExperimentConfig& cfg, const TabularMDP& mdp) {
  if (cfg.representation == "quantile") return Projection::quantile(cfg.num_atoms);
  if (cfg.representation == "categorical")
    return Projection::categorical(uniform_grid(cfg.vmax > 0.0 ? cfg.vmax : default_vmax(mdp), cfg.num_atoms));
  if (cfg.representation == "none") return Projection::capped(cfg.max_atoms);
  throw parameter_error("config: unknown representation '" + cfg.representation + "'");
}

SweepCell run_sweep_cell(const ExperimentConfig& cfg, const TabularMDP& mdp, const Policy& pi, const Policy& mu,
                         const TraceConfig& trace, OperatorKind kind) {
  SweepCell cell;
  const DistOperator op(kind, mdp, pi, mu, trace, trace.horizon + 1);
  const Projection proj = sweep_projection(cfg, mdp);
  const DistVector eta0 = constant_dist_vector(mdp, DiracMixture::dirac(0.0));
  // One run serves both the fixed point and the first `iterations` iterates.
  std::vector<DistVector> iterates{eta0};
  FixedPointResult& fp = cell.fixed_point;
  fp = {eta0, 0, kInfinity};
  while (fp.iterations < cfg.fp_max_iters &&
         (fp.last_change > cfg.fp_tol || fp.iterations < cfg.iterations)) {
    DistVector next = op(fp.eta, proj);
    fp.last_change = sup_distance(next, fp.eta, Metric::wasserstein, kInfinity);
    fp.eta = std::move(next);
    ++fp.iterations;
    if (fp.iterations <= cfg.iterations) iterates.push_back(fp.eta);
  }
  for (const auto& it : iterates) {
    cell.distance.push_back(sup_distance(it, fp.eta, Metric::cramer, cfg.metric_p));
    cell.distance_winf.push_back(sup_distance(it, fp.eta, Metric::wasserstein, kInfinity));
  }
  for (std::size_t k = 0; k + 1 < iterates.size(); ++k)
    cell.step_winf.push_back(sup_distance(iterates[k + 1], iterates[k], Metric::wasserstein, kInfinity));
  const double d0 = cell.distance.front();
  if (d0 > 0.0)
    for (double d : cell.distance) cell.auc += d / d0;
  cell.rate = contraction_rate(mdp, pi, mu, trace);
  return cell;
}

PairDistance fixed_point_error(const DistVector& eta, const DistVector& reference, double p) {
  return {lp_distance(eta[0], reference[0], p), sup_distance(eta, reference, Metric::cramer, p)};
}

// --- counterexample ---------------------------------------------------------------

RunResult cmd_counterexample(const ExperimentConfig& cfg) {
  const TabularMDP mdp = sweep_mdp(cfg, 0);
  if (mdp.num_states() != 1 || mdp.num_actions() != 1)
    throw parameter_error("counterexample: needs the one-state, one-action MDP");
  const Policy pi = uniform_policy(1, 1);
  const TraceConfig trace = cfg.trace_config();
  const double p = cfg.metric_p;
  const DiracMixture truth = DiracMixture::dirac(mdp.mean_reward(0, 0) / (1.0 - mdp.gamma()));
  const std::vector<OperatorKind> kinds{OperatorKind::bellman, OperatorKind::retrace, OperatorKind::alt_bar,
                                        OperatorKind::alt_tilde};
  Rng init_rng = Rng(cfg.seed).split("init");
  std::vector<double> inits(static_cast<std::size_t>(cfg.runs));
  for (double& z : inits) z = init_rng.uniform(-5.0, 5.0);

  const int n_runs = cfg.runs;
  const int tasks = static_cast<int>(kinds.size()) * n_runs;
  std::vector<std::vector<double>> curves(static_cast<std::size_t>(tasks));
  std::vector<int> gridded(static_cast<std::size_t>(tasks), -1);
  const Projection proj = sweep_projection(cfg, mdp);
  const std::vector<DistanceSpec> dists{{metric_name(p), Metric::cramer, p}};
  parallel_for(tasks, cfg.jobs, [&](int t) {
    const OperatorKind kind = kinds[static_cast<std::size_t>(t / n_runs)];
    const double z0 = inits[static_cast<std::size_t>(t % n_runs)];
    const DistOperator op(kind, mdp, pi, pi, trace);
    DistVector truth_vec(1, 1, truth);
    const std::vector<Reference> refs{{"eta_pi", truth_vec}};
    const IterateLog log = dp_iterate(op, proj, DistVector(1, 1, DiracMixture::dirac(z0)), cfg.iterations, refs, dists);
    auto& curve = curves[static_cast<std::size_t>(t)];
    for (const auto& row : log.rows) curve.push_back(row.value);
    gridded[static_cast<std::size_t>(t)] = log.first_gridded;
  });

  const ContractionRate rate = contraction_rate(mdp, pi, pi, trace);
  std::vector<std::string> diag{"beta_retrace=" + num(rate.beta), "tail_bound=" + num(rate.tail_bound),
                                "eta_pi=dirac(" + num(truth.atoms().front().location) + ")"};
  for (int t = 0; t < tasks; ++t)
    if (gridded[static_cast<std::size_t>(t)] >= 0)
      diag.push_back("gridded operator=" + to_string(kinds[static_cast<std::size_t>(t / n_runs)]) +
                     " run=" + std::to_string(t % n_runs) + " from_iteration=" +
                     std::to_string(gridded[static_cast<std::size_t>(t)]) + " points=" + std::to_string(proj.fallback_points));
  std::ostringstream body;
  write_header(body, "counterexample", cfg, diag);
  body << "operator,run,init,iteration,metric,value\n";
  for (int t = 0; t < tasks; ++t) {
    const auto& curve = curves[static_cast<std::size_t>(t)];
    for (std::size_t k = 0; k < curve.size(); ++k)
      body << to_string(kinds[static_cast<std::size_t>(t / n_runs)]) << ',' << t % n_runs << ','
           << num(inits[static_cast<std::size_t>(t % n_runs)]) << ',' << k << ',' << metric_name(p) << ','
           << num(curve[k]) << '\n';
  }

  auto curve_of = [&](OperatorKind kind, int run) -> const std::vector<double>& {
    const auto idx = static_cast<std::size_t>(std::find(kinds.begin(), kinds.end(), kind) - kinds.begin());
    return curves[idx * static_cast<std::size_t>(n_runs) + static_cast<std::size_t>(run)];
  };
  // Between Diracs d^p = |z - 2|, which the operators contract by exactly beta
  // (Retrace) and gamma (Bellman); comparing p-th powers keeps the sqrt of
  // round-off out of the bound.
  bool retrace_ok = true, bellman_ok = true, alt_ok = true;
  double worst_alt = kInfinity;
  for (int r = 0; r < n_runs; ++r) {
    const auto& rc = curve_of(OperatorKind::retrace, r);
    const double d0 = std::pow(rc[0], p);
    for (std::size_t k = 0; k < rc.size(); ++k)
      retrace_ok = retrace_ok && std::pow(rc[k], p) <= std::pow(rate.beta, static_cast<double>(k)) * d0 + 1e-9;
    const auto& bc = curve_of(OperatorKind::bellman, r);
    for (std::size_t k = 0; k + 1 < bc.size(); ++k)
      bellman_ok = bellman_ok && std::pow(bc[k + 1], p) <= mdp.gamma() * std::pow(bc[k], p) + 1e-12;
    const auto& ac = curve_of(OperatorKind::alt_bar, r);
    const double m = *std::min_element(ac.begin() + 1, ac.end());
    worst_alt = std::min(worst_alt, m);
    alt_ok = alt_ok && m > 0.1;
  }
  std::vector<Check> checks{
      {"retrace_geometric_rate", retrace_ok, "d_k^p <= beta^k d_0^p + 1e-9 with beta=" + num(rate.beta)},
      {"bellman_step_ratio", bellman_ok, "d_{k+1}^p <= gamma d_k^p + 1e-12"},
      {"alt_bar_separated", alt_ok, "min over iterations 1.." + std::to_string(cfg.iterations) + " = " + num(worst_alt)},
  };
  return finish(body, std::move(checks));
}

// --- tabular sweeps -------------------------------------------------------------

namespace {

SweepGrid run_grid(const ExperimentConfig& cfg, const std::vector<double>& keys,
                const std::function<std::pair<Policy, TraceConfig>(const TabularMDP&, int, double)>& setup) {
  SweepGrid g;
  g.keys = keys;
  g.num_mdps = cfg.num_mdps;
  g.n_keys = static_cast<int>(keys.size());
  const int n = cfg.num_mdps * g.n_keys;
  g.cells.resize(static_cast<std::size_t>(n));
  parallel_for(n, cfg.jobs, [&](int t) {
    const int m = t / g.n_keys;
    const double key = keys[static_cast<std::size_t>(t % g.n_keys)];
    const TabularMDP mdp = sweep_mdp(cfg, m);
    const Policy mu = uniform_policy(mdp.num_states(), mdp.num_actions());
    const auto [pi, trace] = setup(mdp, m, key);
    g.cells[static_cast<std::size_t>(t)] = run_sweep_cell(cfg, mdp, pi, mu, trace);
  });
  return g;
}

void write_curves(std::ostream& os, const std::string& key_name, const std::vector<double>& keys, const SweepGrid& g,
                  int num_mdps, const std::string& lp_name) {
  os << "mdp," << key_name << ",iteration,metric,value\n";
  for (int m = 0; m < num_mdps; ++m)
    for (int k = 0; k < g.n_keys; ++k) {
      const SweepCell& c = g.at(m, k);
      for (std::size_t it = 0; it < c.distance.size(); ++it) {
        os << m << ',' << num(keys[static_cast<std::size_t>(k)]) << ',' << it << ',' << lp_name << ',' << num(c.distance[it]) << '\n';
        os << m << ',' << num(keys[static_cast<std::size_t>(k)]) << ',' << it << ",Winf," << num(c.distance_winf[it]) << '\n';
      }
    }
}

std::vector<std::string> grid_diagnostics(const std::string& key_name, const std::vector<double>& keys, const SweepGrid& g,
                                          int num_mdps) {
  std::vector<std::string> diag;
  for (int k = 0; k < g.n_keys; ++k) {
    double beta = 0.0, tail = 0.0, change = 0.0;
    int iters = 0;
    for (int m = 0; m < num_mdps; ++m) {
      beta = std::max(beta, g.at(m, k).rate.beta);
      tail = g.at(m, k).rate.tail_bound;
      change = std::max(change, g.at(m, k).fixed_point.last_change);
      iters = std::max(iters, g.at(m, k).fixed_point.iterations);
    }
    diag.push_back(key_name + "=" + num(keys[static_cast<std::size_t>(k)]) + " max_beta=" + num(beta) +
                   " tail_bound=" + num(tail) + " fixed_point_iterations<=" + std::to_string(iters) +
                   " last_change<=" + num(change));
  }
  return diag;
}

std::vector<double> mean_auc(const SweepGrid& g, int num_mdps) {
  std::vector<double> out;
  for (int k = 0; k < g.n_keys; ++k) {
    std::vector<double> v;
    for (int m = 0; m < num_mdps; ++m) v.push_back(g.at(m, k).auc);
    out.push_back(mean_of(v));
  }
  return out;
}

Check converged_check(const SweepGrid& g, double tol) {
  double worst = 0.0;
  for (const auto& c : g.cells) worst = std::max(worst, c.fixed_point.last_change);
  return {"fixed_points_converged", worst <= tol, "max final change " + num(worst)};
}

}  // namespace

SweepGrid offpolicy_grid(const ExperimentConfig& cfg) {
  return run_grid(cfg, cfg.epsilon_grid, [&](const TabularMDP& mdp, int m, double eps) {
    return std::make_pair(sweep_target(cfg, mdp, m, eps), cfg.trace_config());
  });
}

SweepGrid trace_grid(const ExperimentConfig& cfg) {
  return run_grid(cfg, cfg.cbar_grid, [&](const TabularMDP& mdp, int m, double cbar) {
    return std::make_pair(sweep_target(cfg, mdp, m, cfg.epsilon), cfg.trace_config(cbar));
  });
}

RunResult cmd_sweep_offpolicy(const ExperimentConfig& cfg) { return report_sweep_offpolicy(cfg, offpolicy_grid(cfg)); }
RunResult cmd_sweep_trace(const ExperimentConfig& cfg) { return report_sweep_trace(cfg, trace_grid(cfg)); }
RunResult cmd_fixed_point_quality(const ExperimentConfig& cfg) {
  return report_fixed_point_quality(cfg, trace_grid(cfg));
}

RunResult report_sweep_offpolicy(const ExperimentConfig& cfg, const SweepGrid& g) {
  const auto& keys = g.keys;
  std::ostringstream body;
  write_header(body, "sweep-offpolicy", cfg, grid_diagnostics("epsilon", keys, g, cfg.num_mdps));
  write_curves(body, "epsilon", keys, g, cfg.num_mdps, metric_name(cfg.metric_p));

  const std::vector<double> auc = mean_auc(g, cfg.num_mdps);
  bool decreasing = true;
  for (const auto& c : g.cells)
    for (std::size_t k = 0; k + 1 < c.distance_winf.size(); ++k)
      decreasing = decreasing && c.distance_winf[k + 1] <= c.distance_winf[k] + 1e-10;
  // The most off-policy column still contracts at least as fast as one step.
  const auto far = static_cast<int>(std::max_element(keys.begin(), keys.end()) - keys.begin());
  const double gamma = sweep_mdp(cfg, 0).gamma();
  bool rate_ok = true;
  double worst_ratio = 0.0;
  for (int m = 0; m < cfg.num_mdps; ++m) {
    const auto& s = g.at(m, far).step_winf;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
      rate_ok = rate_ok && s[k + 1] <= gamma * s[k] + 1e-10;
      if (s[k] > 1e-9) worst_ratio = std::max(worst_ratio, s[k + 1] / s[k]);
    }
  }
  std::vector<Check> checks{
      monotone_check("auc_nondecreasing_in_epsilon", keys, auc, true),
      {"curves_nonincreasing_winf", decreasing, "sup W_inf to the fixed point never grows"},
      {"most_offpolicy_rate_le_gamma", rate_ok, "worst successive W_inf ratio " + num(worst_ratio)},
      converged_check(g, cfg.fp_tol),
  };
  return finish(body, std::move(checks));
}

RunResult report_sweep_trace(const ExperimentConfig& cfg, const SweepGrid& g) {
  const auto& keys = g.keys;
  std::ostringstream body;
  write_header(body, "sweep-trace", cfg, grid_diagnostics("cbar", keys, g, cfg.num_mdps));
  write_curves(body, "cbar", keys, g, cfg.num_mdps, metric_name(cfg.metric_p));
  std::vector<Check> checks{
      monotone_check("auc_nonincreasing_in_cbar", keys, mean_auc(g, cfg.num_mdps), false),
      converged_check(g, cfg.fp_tol),
  };
  return finish(body, std::move(checks));
}

namespace {

std::vector<DistVector> references_for(const ExperimentConfig& cfg, double eps) {
  std::vector<DistVector> refs(static_cast<std::size_t>(cfg.num_mdps));
  parallel_for(cfg.num_mdps, cfg.jobs, [&](int m) {
    const TabularMDP mdp = sweep_mdp(cfg, m);
    const Policy pi = sweep_target(cfg, mdp, m, eps);
    refs[static_cast<std::size_t>(m)] =
        project_reference(cfg, mdp, ground_truth_eta(mdp, pi, cfg.truth_atoms, cfg.truth_iters));
  });
  return refs;
}

}  // namespace

RunResult report_fixed_point_quality(const ExperimentConfig& cfg, const SweepGrid& g) {
  const auto& keys = g.keys;
  const std::vector<DistVector> refs = references_for(cfg, cfg.epsilon);
  std::ostringstream body;
  write_header(body, "fixed-point-quality", cfg, grid_diagnostics("cbar", keys, g, cfg.num_mdps));
  const std::string lp = metric_name(cfg.metric_p);
  body << "mdp,cbar,beta,distance_start,distance_sup\n";
  std::vector<double> mean_start, mean_sup;
  for (int k = 0; k < g.n_keys; ++k) {
    std::vector<double> starts, sups;
    for (int m = 0; m < cfg.num_mdps; ++m) {
      const PairDistance d = fixed_point_error(g.at(m, k).fixed_point.eta, refs[static_cast<std::size_t>(m)], cfg.metric_p);
      starts.push_back(d.at_start);
      sups.push_back(d.sup);
      body << m << ',' << num(keys[static_cast<std::size_t>(k)]) << ',' << num(g.at(m, k).rate.beta) << ','
           << num(d.at_start) << ',' << num(d.sup) << '\n';
    }
    mean_start.push_back(mean_of(starts));
    mean_sup.push_back(mean_of(sups));
  }
  std::vector<Check> checks{
      monotone_check("quality_nonincreasing_in_cbar", keys, mean_start, false),
      {"quality_sup_report", true, monotone_check("", keys, mean_sup, false).detail},
      converged_check(g, cfg.fp_tol),
  };
  return finish(body, std::move(checks));
}

RunResult cmd_uncorrected_bias(const ExperimentConfig& cfg) {
  const std::vector<DistVector> refs = references_for(cfg, cfg.epsilon);
  const int n = cfg.num_mdps;
  std::vector<SweepCell> retrace(static_cast<std::size_t>(n)), uncorrected(static_cast<std::size_t>(n));
  parallel_for(2 * n, cfg.jobs, [&](int t) {
    const int m = t / 2;
    const TabularMDP mdp = sweep_mdp(cfg, m);
    const Policy mu = uniform_policy(mdp.num_states(), mdp.num_actions());
    const Policy pi = sweep_target(cfg, mdp, m, cfg.epsilon);
    const OperatorKind kind = t % 2 == 0 ? OperatorKind::retrace : OperatorKind::uncorrected;
    (t % 2 == 0 ? retrace : uncorrected)[static_cast<std::size_t>(m)] =
        run_sweep_cell(cfg, mdp, pi, mu, cfg.trace_config(), kind);
  });
  std::ostringstream body;
  const TraceConfig trace = cfg.trace_config();
  write_header(body, "uncorrected-bias", cfg,
               {"uncorrected bootstrap depth n=" + std::to_string(trace.horizon + 1),
                "tail_bound=" + num(std::pow(cfg.gamma, trace.horizon + 1))});
  body << "mdp,operator,distance_start,distance_sup\n";
  std::vector<double> gap;
  for (int m = 0; m < n; ++m) {
    const auto& ref = refs[static_cast<std::size_t>(m)];
    const PairDistance r = fixed_point_error(retrace[static_cast<std::size_t>(m)].fixed_point.eta, ref, cfg.metric_p);
    const PairDistance u = fixed_point_error(uncorrected[static_cast<std::size_t>(m)].fixed_point.eta, ref, cfg.metric_p);
    body << m << ",retrace," << num(r.at_start) << ',' << num(r.sup) << '\n';
    body << m << ",uncorrected," << num(u.at_start) << ',' << num(u.sup) << '\n';
    gap.push_back(u.at_start - r.at_start);
  }
  const double mean_gap = mean_of(gap);
  std::vector<Check> checks{{"uncorrected_bias_exceeds_retrace", mean_gap > 0.0, "mean gap " + num(mean_gap)}};
  return finish(body, std::move(checks));
}

// --- estimator checks ---------------------------------------------------------------

namespace {

struct Welford {
  double n = 0.0, mean = 0.0, m2 = 0.0;
  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double std_error() const { return n > 1.0 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0; }
};

Check z_check(const std::string& name, const Welford& w, double exact, std::ostream& rows, int config) {
  const double se = w.std_error();
  const double diff = std::abs(w.mean - exact);
  const double z = se > 0.0 ? diff / se : (diff <= 1e-12 ? 0.0 : kInfinity);
  const bool pass = z <= 3.0;
  rows << config << ',' << name << ',' << num(w.mean) << ',' << num(se) << ',' << num(exact) << ',' << num(z) << ','
       << (pass ? "pass" : "fail") << '\n';
  return {name + "_config" + std::to_string(config), pass, "z=" + num(z)};
}

}  // namespace

RunResult cmd_unbiasedness(const ExperimentConfig& cfg) {
  const int n_cfg = cfg.configs;
  std::vector<std::string> blocks(static_cast<std::size_t>(n_cfg));
  std::vector<std::vector<Check>> block_checks(static_cast<std::size_t>(n_cfg));
  parallel_for(n_cfg, cfg.jobs, [&](int c) {
    Rng base = Rng(cfg.seed).split("unbiased").split(static_cast<std::uint64_t>(c));
    Rng setup = base.split("setup");
    Rng sampler = base.split("trajectories");
    const TabularMDP mdp = make_random_mdp(base.split("mdp").seed(), cfg.num_states, cfg.num_actions,
                                           cfg.dirichlet, cfg.gamma);
    const Policy mu = uniform_policy(mdp.num_states(), mdp.num_actions());
    const Policy pi = mix_policy(random_deterministic_policy(mdp.num_states(), mdp.num_actions(), setup), mu,
                                 cfg.epsilon, cfg.convention());
    const TraceConfig trace = cfg.trace_config();
    DistVector eta(mdp.num_states(), mdp.num_actions());
    for (int i = 0; i < eta.num_pairs(); ++i) {
      std::vector<double> locs(5);
      for (double& z : locs) z = setup.normal(0.0, 2.0);
      eta[i] = DiracMixture::uniform(locs);
    }
    const StateAction start = mdp.pair(static_cast<int>(setup.uniform(0.0, 1.0) * mdp.num_pairs()) % mdp.num_pairs());
    const double theta = setup.normal(0.0, 2.0);
    const double tau = setup.uniform(0.05, 0.95);
    const Eigen::VectorXd grid = uniform_grid(cfg.vmax > 0.0 ? cfg.vmax : default_vmax(mdp) + 6.0, cfg.num_atoms);
    Eigen::VectorXd logits(grid.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits[i] = setup.normal();
    const Eigen::VectorXd q = softmax(logits);

    const DiracMixture target = apply_backup(retrace_decompose(mdp, pi, mu, trace, start.state, start.action), eta);
    const double exact_loss = qr_loss(theta, tau, target);
    const double exact_grad = qr_loss_grad(theta, tau, target);
    const double exact_ce = ce_loss(q, target, grid);
    const double exact_ce_grad_max =
        ce_logit_grad(logits, project_categorical(target, grid).probs).cwiseAbs().maxCoeff();

    double rho_bar = 0.0;
    for (int x = 0; x < mdp.num_states(); ++x)
      for (int a = 0; a < mdp.num_actions(); ++a)
        if (mu(x, a) > 0.0) rho_bar = std::max(rho_bar, pi(x, a) / mu(x, a));
    double grad_bound = 1.0;
    for (int t = 1; t <= trace.horizon; ++t) grad_bound += 2.0 * std::pow(rho_bar, t);

    Welford loss, grad, ce;
    double max_abs_grad = 0.0;
    for (int k = 0; k < cfg.trajectories; ++k) {
      const Trajectory traj = sample_trajectory(mdp, pi, mu, start, trace.horizon + 1, sampler);
      const BackupSpec spec = sampled_retrace_spec(mdp, traj, pi, trace);
      const LossEstimate est = qr_loss_terms(spec, eta, theta, tau);
      loss.add(est.loss);
      grad.add(est.grad);
      max_abs_grad = std::max(max_abs_grad, std::abs(est.grad));
      ce.add(ce_against(q, project_terms(spec, eta, grid)));
    }
    std::ostringstream rows;
    auto& checks = block_checks[static_cast<std::size_t>(c)];
    checks.push_back(z_check("qr_loss", loss, exact_loss, rows, c));
    checks.push_back(z_check("qr_grad", grad, exact_grad, rows, c));
    checks.push_back(z_check("ce_loss", ce, exact_ce, rows, c));
    checks.push_back({"qr_grad_bounded_config" + std::to_string(c), max_abs_grad <= grad_bound + 1e-12,
                      "max |grad| " + num(max_abs_grad) + " <= " + num(grad_bound)});
    checks.push_back({"ce_softmax_grad_bounded_config" + std::to_string(c), exact_ce_grad_max <= 1.0 + 1e-12,
                      "max |grad| " + num(exact_ce_grad_max)});
    blocks[static_cast<std::size_t>(c)] = rows.str();
  });
  std::ostringstream body;
  write_header(body, "unbiasedness", cfg, {"estimator trajectories per config=" + std::to_string(cfg.trajectories)});
  body << "config,quantity,mc_mean,std_error,exact,z,result\n";
  std::vector<Check> checks;
  for (int c = 0; c < n_cfg; ++c) {
    body << blocks[static_cast<std::size_t>(c)];
    for (auto& ch : block_checks[static_cast<std::size_t>(c)]) checks.push_back(std::move(ch));
  }
  return finish(body, std::move(checks));
}

RunResult cmd_forward_backward(const ExperimentConfig& cfg) {
  const TabularMDP chain = make_chain3_mdp(cfg.gamma);
  const double gamma = chain.gamma();
  const double alpha = cfg.alpha > 0.0 ? cfg.alpha : 1.1 * 2.0 * gamma * gamma;
  const Policy one = uniform_policy(chain.num_states(), 1);
  QuantileTable table(chain.num_states(), 1, cfg.num_atoms, 0.0);
  table.matrix().row(1).setConstant(1.0);
  table.pin_terminals(chain);
  Rng rng = Rng(cfg.seed).split("forward-backward");
  const Trajectory episode = sample_trajectory(chain, one, one, {0, 0}, 10, rng);
  const double fwd = forward_view_episode(table, chain, one, episode, cfg.lambda, alpha)(0, 0);
  const double bwd = backward_view_episode(table, chain, one, episode, cfg.lambda, alpha)(0, 0);

  // Value-based views on random no-revisit episodes.
  Rng vrng = Rng(cfg.seed).split("value-episodes");
  const TabularMDP mdp = make_random_mdp(vrng.split("mdp").seed(), 10, 2, cfg.dirichlet, cfg.gamma);
  const Policy pi = uniform_policy(mdp.num_states(), mdp.num_actions());
  double worst = 0.0;
  int episodes = 0, attempts = 0;
  bool memory_ok = true;
  while (episodes < cfg.runs && attempts < 100 * cfg.runs) {
    ++attempts;
    const StateAction start = mdp.pair(static_cast<int>(vrng.uniform(0.0, 1.0) * mdp.num_pairs()) % mdp.num_pairs());
    const Trajectory traj = sample_trajectory(mdp, pi, pi, start, 6, vrng);
    std::vector<int> seen;
    bool revisit = false;
    for (const auto& s : traj.steps) {
      const int i = mdp.index(s.state, s.action);
      revisit = revisit || std::find(seen.begin(), seen.end(), i) != seen.end();
      seen.push_back(i);
    }
    if (revisit) continue;
    ++episodes;
    Eigen::VectorXd q(mdp.num_pairs());
    for (Eigen::Index i = 0; i < q.size(); ++i) q[i] = vrng.normal();
    const double lambda = vrng.uniform(0.0, 1.0);
    const Eigen::VectorXd qf = value_forward_episode(q, mdp, pi, traj, lambda, 0.1);
    const Eigen::VectorXd qb = value_backward_episode(q, mdp, pi, traj, lambda, 0.1);
    worst = std::max(worst, (qf - qb).cwiseAbs().maxCoeff());
    BackwardStats stats;
    QuantileTable qt(mdp.num_states(), mdp.num_actions(), 3, 0.0);
    backward_view_episode(qt, mdp, pi, traj, std::max(lambda, 1e-3), 0.1, &stats);
    memory_ok = memory_ok && stats.peak_anchors == traj.size();
  }

  std::ostringstream body;
  write_header(body, "forward-backward", cfg,
               {"alpha=" + num(alpha), "alpha_window=(" + num(2 * gamma * gamma) + "," + num(2 * gamma) + ")"});
  body << "quantity,value\n";
  body << "alpha," << num(alpha) << '\n';
  body << "theta1_forward," << num(fwd) << '\n';
  body << "theta1_backward," << num(bwd) << '\n';
  body << "value_episodes," << episodes << '\n';
  body << "value_max_abs_difference," << num(worst) << '\n';
  const bool in_window = alpha > 2 * gamma * gamma && alpha < 2 * gamma;
  std::vector<Check> checks{
      {"alpha_in_window", in_window, "alpha=" + num(alpha)},
      {"forward_plus_half_alpha", fwd == 0.5 * alpha, "theta1=" + num(fwd)},
      {"backward_minus_half_alpha", bwd == -0.5 * alpha, "theta1=" + num(bwd)},
      {"value_views_agree", episodes == cfg.runs && worst <= 1e-12,
       std::to_string(episodes) + " episodes, max diff " + num(worst)},
      {"backward_memory_linear", memory_ok, "peak anchors equal episode length"},
  };
  return finish(body, std::move(checks));
}

// --- dispatch -----------------------------------------------------------------------

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"counterexample",   "sweep-offpolicy", "sweep-trace",
                                              "fixed-point-quality", "uncorrected-bias", "unbiasedness",
                                              "forward-backward"};
  return names;
}

RunResult run_experiment(const std::string& command, const ExperimentConfig& cfg) {
  if (command == "counterexample") return cmd_counterexample(cfg);
  if (command == "sweep-offpolicy") return cmd_sweep_offpolicy(cfg);
  if (command == "sweep-trace") return cmd_sweep_trace(cfg);
  if (command == "fixed-point-quality") return cmd_fixed_point_quality(cfg);
  if (command == "uncorrected-bias") return cmd_uncorrected_bias(cfg);
  if (command == "unbiasedness") return cmd_unbiasedness(cfg);
  if (command == "forward-backward") return cmd_forward_backward(cfg);
  throw parameter_error("unknown experiment: " + command);
}

}  // namespace distret
