#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "distret/operators.hpp"
#include "distret/rng.hpp"
#include "oracles.hpp"

using namespace distret;

namespace {

int pick(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

struct Config {
  TabularMDP mdp;
  Policy pi;
  Policy mu;
  TraceConfig trace;
};

Policy random_stochastic_policy(int s, int a, Rng& rng) {
  Eigen::MatrixXd p(s, a);
  for (int x = 0; x < s; ++x) p.row(x) = rng.dirichlet(a, 1.0).transpose();
  return Policy(p);
}

/// Random MDP whose rewards have two outcomes per pair.
TabularMDP stochastic_reward_mdp(std::uint64_t seed, int s, int a, double gamma) {
  const TabularMDP base = make_random_mdp(seed, s, a, 0.5, gamma);
  Rng rng(seed ^ 0x5eedULL);
  std::vector<std::vector<RewardOutcome>> rewards;
  for (int i = 0; i < base.num_pairs(); ++i) {
    const double p = rng.uniform(0.2, 0.8);
    rewards.push_back({{rng.normal(), p}, {rng.normal(), 1.0 - p}});
  }
  return TabularMDP(s, a, rewards, base.transitions(), gamma);
}

TraceConfig random_trace(Rng& rng, int horizon) {
  switch (pick(rng, 0, 3)) {
    case 0: return TraceConfig::clipped(rng.uniform(0.2, 2.0), horizon);
    case 1: return TraceConfig::clipped_lambda(rng.uniform(0.3, 1.0), rng.uniform(0.5, 1.5), horizon);
    case 2: return TraceConfig::full_is(horizon);
    default: return TraceConfig::truncated_is(pick(rng, 1, horizon), horizon);
  }
}

Config random_config(Rng& rng, int max_horizon = 3) {
  const int horizon = pick(rng, 1, max_horizon);
  TabularMDP mdp = stochastic_reward_mdp(pick(rng, 0, 1 << 30), 3, 2, rng.uniform(0.5, 0.95));
  Policy mu = random_stochastic_policy(3, 2, rng);
  Policy pi = random_stochastic_policy(3, 2, rng);
  return {std::move(mdp), std::move(pi), std::move(mu), random_trace(rng, horizon)};
}

DiracMixture random_probability(Rng& rng, int n) {
  std::vector<Atom> atoms;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    atoms.push_back({rng.normal(0.0, 3.0), rng.uniform(0.1, 1.0)});
    total += atoms.back().weight;
  }
  for (auto& a : atoms) a.weight /= total;
  return DiracMixture::from_atoms(std::move(atoms));
}

DistVector random_eta(const TabularMDP& mdp, Rng& rng, int max_atoms = 3) {
  DistVector eta(mdp.num_states(), mdp.num_actions());
  for (int i = 0; i < eta.num_pairs(); ++i) eta[i] = random_probability(rng, pick(rng, 1, max_atoms));
  apply_terminal_values(mdp, eta);
  return eta;
}

/// Two non-terminal states feeding two terminal ones; every return
/// distribution is finite, so eta^pi is exact after three one-step sweeps.
TabularMDP acyclic_mdp() {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(8, 4);
  p.row(0) << 0.0, 0.6, 0.4, 0.0;
  p.row(1) << 0.0, 0.2, 0.3, 0.5;
  p.row(2) << 0.0, 0.0, 0.7, 0.3;
  p.row(3) << 0.0, 0.0, 0.1, 0.9;
  p.row(4) << 0.0, 0.0, 1.0, 0.0;
  p.row(5) << 0.0, 0.0, 1.0, 0.0;
  p.row(6) << 0.0, 0.0, 0.0, 1.0;
  p.row(7) << 0.0, 0.0, 0.0, 1.0;
  std::vector<std::vector<RewardOutcome>> r{{{0.0, 0.5}, {1.0, 0.5}}, {{-1.0, 0.25}, {2.0, 0.75}},
                                            {{0.5, 1.0}},            {{0.0, 0.3}, {-0.5, 0.7}},
                                            {{0.0, 1.0}},            {{0.0, 1.0}},
                                            {{0.0, 1.0}},            {{0.0, 1.0}}};
  return TabularMDP(4, 2, r, p, 0.8, {std::nullopt, std::nullopt, 0.0, 3.0});
}

DistVector exact_eta(const TabularMDP& mdp, const Policy& pi) {
  const DistOperator op(OperatorKind::bellman, mdp, pi, pi, TraceConfig::constant(0.0, 1));
  DistVector eta = constant_dist_vector(mdp, DiracMixture::dirac(0.0));
  for (int k = 0; k < 4; ++k) eta = op(eta);
  return eta;
}

double max_l1(const DistVector& a, const DistVector& b) { return sup_distance(a, b, Metric::cramer, 1.0); }

const TraceConfig kCounterexampleTrace = TraceConfig::full_is(1);

}  // namespace

TEST_CASE("bellman back-up examples") {
  const TabularMDP mdp = make_counterexample_mdp();
  const Policy pi = uniform_policy(1, 1);
  for (double z : {-3.0, 0.0, 2.0, 7.5}) {
    DistVector eta(1, 1, DiracMixture::dirac(z));
    CHECK(bellman_backup(eta, mdp, pi, 0, 0) == DiracMixture::dirac(1.0 + 0.5 * z));
  }
}

TEST_CASE("bellman back-up mean is the value back-up") {
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const Config c = random_config(rng);
    const DistVector eta = random_eta(c.mdp, rng);
    const Eigen::VectorXd q = mean_vector(eta);
    for (int i = 0; i < c.mdp.num_pairs(); ++i) {
      const auto [x, a] = c.mdp.pair(i);
      double expected = c.mdp.mean_reward(x, a);
      for (int y = 0; y < 3; ++y)
        for (int b = 0; b < 2; ++b) expected += c.mdp.gamma() * c.mdp.transition(x, a)(y) * c.pi(y, b) * q[c.mdp.index(y, b)];
      CHECK(bellman_backup(eta, c.mdp, c.pi, x, a).mean() == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("retrace decomposition on the counterexample is a single two-step term") {
  const TabularMDP mdp = make_counterexample_mdp();
  const Policy pi = uniform_policy(1, 1);
  const BackupSpec spec = retrace_decompose(mdp, pi, pi, kCounterexampleTrace, 0, 0);
  REQUIRE(spec.terms.size() == 1);
  CHECK(spec.terms[0].weight == 1.0);
  CHECK(spec.terms[0].shift == 1.5);
  CHECK(spec.terms[0].scale == 0.25);
  CHECK(spec.terms[0].source == 0);
  CHECK(spec.terms[0].depth == 2);
  CHECK(spec.tail_mass == 0.0);
}

TEST_CASE("apply_backup examples") {
  const TabularMDP mdp = make_counterexample_mdp();
  const Policy pi = uniform_policy(1, 1);
  const BackupSpec spec = retrace_decompose(mdp, pi, pi, kCounterexampleTrace, 0, 0);
  DistVector eta(1, 1, DiracMixture::dirac(0.0));
  const double expected[] = {1.5, 1.875, 1.96875};
  for (double e : expected) {
    eta[0] = apply_backup(spec, eta);
    CHECK(eta[0] == DiracMixture::dirac(e));
  }
  for (int k = 0; k < 60; ++k) eta[0] = apply_backup(spec, eta);
  CHECK(eta[0].atoms()[0].location == doctest::Approx(2.0).epsilon(1e-15));

  Rng rng(2);
  const DistVector r = random_eta(make_random_mdp(1, 2, 2, 0.5, 0.9), rng);
  const BackupSpec identity{{{1.0, 0.0, 1.0, 3, 0}}, 0.0};
  CHECK(apply_backup(identity, r) == r[3]);
}

TEST_CASE("zero trace recovers the one-step operator") {
  Rng rng(3);
  for (int k = 0; k < 10; ++k) {
    const Config c = random_config(rng);
    const DistVector eta = random_eta(c.mdp, rng);
    const TraceConfig zero = TraceConfig::constant(0.0, 3);
    for (int i = 0; i < c.mdp.num_pairs(); ++i) {
      const auto [x, a] = c.mdp.pair(i);
      const DiracMixture one_step = bellman_backup(eta, c.mdp, c.pi, x, a);
      CHECK(lp_distance(retrace_backup(eta, c.mdp, c.pi, c.mu, zero, x, a), one_step, 1.0) <= 1e-12);
      CHECK(lp_distance(alt_bar_backup(eta, c.mdp, c.pi, c.mu, zero, x, a), one_step, 1.0) <= 1e-12);
      CHECK(lp_distance(alt_tilde_backup(eta, c.mdp, c.pi, c.mu, zero, x, a), one_step, 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("decomposition weights are convex") {
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const Config c = random_config(rng, 4);
    for (int i = 0; i < c.mdp.num_pairs(); ++i) {
      const auto [x, a] = c.mdp.pair(i);
      const BackupSpec spec = retrace_decompose(c.mdp, c.pi, c.mu, c.trace, x, a);
      double total = spec.tail_mass, min_weight = 1.0, scale_err = 0.0;
      for (const auto& t : spec.terms) {
        min_weight = std::min(min_weight, t.weight);
        scale_err = std::max(scale_err, std::abs(t.scale - std::pow(c.mdp.gamma(), t.depth)));
        total += t.weight;
      }
      CHECK(min_weight >= 0.0);
      CHECK(scale_err <= 1e-14);
      CHECK(std::abs(total - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("retrace back-up matches the TD-form path enumeration") {
  Rng rng(5);
  for (int k = 0; k < 15; ++k) {
    const Config c = random_config(rng);
    const DistVector eta = random_eta(c.mdp, rng, 2);
    for (int i = 0; i < c.mdp.num_pairs(); ++i) {
      const auto [x, a] = c.mdp.pair(i);
      const DiracMixture expected = oracle::retrace_target(c.mdp, c.pi, c.mu, c.trace, eta, x, a);
      CHECK(lp_distance(retrace_backup(eta, c.mdp, c.pi, c.mu, c.trace, x, a), expected, 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("terminal states bootstrap from their pinned value") {
  const TabularMDP mdp = acyclic_mdp();
  Rng rng(6);
  const Policy pi = random_stochastic_policy(4, 2, rng);
  const Policy mu = random_stochastic_policy(4, 2, rng);
  const DistVector eta = random_eta(mdp, rng);
  for (const TraceConfig& tc : {TraceConfig::clipped(1.0, 3), TraceConfig::full_is(2)})
    for (int x = 0; x < 2; ++x)
      for (int a = 0; a < 2; ++a) {
        const DiracMixture expected = oracle::retrace_target(mdp, pi, mu, tc, eta, x, a);
        CHECK(lp_distance(retrace_backup(eta, mdp, pi, mu, tc, x, a), expected, 1.0) <= 1e-10);
      }
}

TEST_CASE("value retrace examples and oracle") {
  const TabularMDP cx = make_counterexample_mdp();
  const Policy one = uniform_policy(1, 1);
  CHECK(value_retrace_backup(Eigen::VectorXd::Zero(1), cx, one, one, kCounterexampleTrace, 0, 0) == 1.5);

  Rng rng(7);
  for (int k = 0; k < 20; ++k) {
    const Config c = random_config(rng);
    const Eigen::VectorXd qpi = q_values(c.mdp, c.pi);
    const Eigen::VectorXd q = Eigen::VectorXd::NullaryExpr(c.mdp.num_pairs(), [&] { return rng.normal(); });
    for (int i = 0; i < c.mdp.num_pairs(); ++i) {
      const auto [x, a] = c.mdp.pair(i);
      CHECK(value_retrace_backup(qpi, c.mdp, c.pi, c.mu, c.trace, x, a) == doctest::Approx(qpi[i]).epsilon(1e-10));
      CHECK(value_retrace_backup(q, c.mdp, c.pi, c.mu, c.trace, x, a) ==
            doctest::Approx(oracle::value_retrace(c.mdp, c.pi, c.mu, c.trace, q, x, a)).epsilon(1e-10));
    }
  }
}

TEST_CASE("mean of the distributional target is the value target") {
  Rng rng(8);
  for (int k = 0; k < 50; ++k) {
    const Config c = random_config(rng, 4);
    const DistVector eta = random_eta(c.mdp, rng);
    const Eigen::VectorXd q = mean_vector(eta);
    for (int i = 0; i < c.mdp.num_pairs(); ++i) {
      const auto [x, a] = c.mdp.pair(i);
      const double dist_mean = retrace_backup(eta, c.mdp, c.pi, c.mu, c.trace, x, a).mean();
      CHECK(std::abs(dist_mean - value_retrace_backup(q, c.mdp, c.pi, c.mu, c.trace, x, a)) <= 1e-10);
    }
  }
}

TEST_CASE("contraction rate examples") {
  const TabularMDP cx = make_counterexample_mdp();
  const Policy one = uniform_policy(1, 1);
  CHECK(contraction_rate(cx, one, one, kCounterexampleTrace).beta == 0.25);
  CHECK(contraction_rate(cx, one, one, kCounterexampleTrace).tail_bound == 0.25);

  Rng rng(9);
  for (int k = 0; k < 10; ++k) {
    const Config c = random_config(rng);
    CHECK(contraction_rate(c.mdp, c.pi, c.mu, TraceConfig::constant(0.0, 4)).beta ==
          doctest::Approx(c.mdp.gamma()).epsilon(1e-14));
    // c = rho for twelve steps: only the depth-13 bootstrap remains.
    const ContractionRate full = contraction_rate(c.mdp, c.pi, c.mu, TraceConfig::full_is(12));
    CHECK(full.beta <= full.tail_bound * (1.0 + 1e-12));
    const double b = contraction_rate(c.mdp, c.pi, c.mu, c.trace).beta;
    CHECK(b <= c.mdp.gamma() + 1e-12);
    CHECK(b == doctest::Approx(oracle::beta(c.mdp, c.pi, c.mu, c.trace)).epsilon(1e-12));
    double from_terms = 0.0;
    for (int i = 0; i < c.mdp.num_pairs(); ++i) {
      const auto [x, a] = c.mdp.pair(i);
      from_terms = std::max(from_terms, retrace_decompose(c.mdp, c.pi, c.mu, c.trace, x, a).weighted_scale());
    }
    CHECK(b == doctest::Approx(from_terms).epsilon(1e-12));
  }
}

TEST_CASE("truncation depth moves the rate from gamma toward its limit") {
  Rng rng(10);
  for (int k = 0; k < 10; ++k) {
    const Config c = random_config(rng);
    const double cbar = rng.uniform(0.5, 1.0);
    double prev = c.mdp.gamma() + 1e-12;
    for (int n = 1; n <= 8; ++n) {
      const double b = contraction_rate(c.mdp, c.pi, c.mu, TraceConfig::clipped(cbar, n)).beta;
      CHECK(b <= prev + 1e-12);
      prev = b;
    }
    CHECK(prev < c.mdp.gamma());
  }
}

TEST_CASE("retrace contracts at the measured rate") {
  Rng rng(11);
  for (int k = 0; k < 10; ++k) {
    const Config c = random_config(rng);
    const DistOperator op(OperatorKind::retrace, c.mdp, c.pi, c.mu, c.trace);
    double max_scale = 0.0, beta = 0.0;
    for (int i = 0; i < op.num_pairs(); ++i) {
      beta = std::max(beta, op.spec(i).weighted_scale());
      for (const auto& t : op.spec(i).terms) max_scale = std::max(max_scale, t.scale);
    }
    for (int j = 0; j < 10; ++j) {
      const DistVector e1 = random_eta(c.mdp, rng), e2 = random_eta(c.mdp, rng);
      const DistVector r1 = op(e1), r2 = op(e2);
      CHECK(sup_distance(r1, r2, Metric::wasserstein, 1.0) <= beta * sup_distance(e1, e2, Metric::wasserstein, 1.0) + 1e-10);
      CHECK(sup_distance(r1, r2, Metric::wasserstein, kInfinity) <=
            max_scale * sup_distance(e1, e2, Metric::wasserstein, kInfinity) + 1e-10);
      for (double p : {1.0, 2.0, 4.0})
        CHECK(sup_distance(r1, r2, Metric::cramer, p) <=
              std::pow(beta, 1.0 / p) * sup_distance(e1, e2, Metric::cramer, p) + 1e-10);
    }
  }
}

TEST_CASE("uncorrected back-up reductions") {
  Rng rng(12);
  for (int k = 0; k < 10; ++k) {
    const Config c = random_config(rng);
    const DistVector eta = random_eta(c.mdp, rng);
    for (int i = 0; i < c.mdp.num_pairs(); ++i) {
      const auto [x, a] = c.mdp.pair(i);
      CHECK(lp_distance(uncorrected_nstep_backup(eta, c.mdp, c.pi, c.mu, 1, x, a),
                        bellman_backup(eta, c.mdp, c.pi, x, a), 1.0) <= 1e-12);
      // On-policy, c = rho = 1 up to depth n - 1 bootstraps at n.
      for (int n = 2; n <= 4; ++n) {
        const DiracMixture unc = uncorrected_nstep_backup(eta, c.mdp, c.pi, c.pi, n, x, a);
        CHECK(lp_distance(unc, retrace_backup(eta, c.mdp, c.pi, c.pi, TraceConfig::full_is(n - 1), x, a), 1.0) <= 1e-12);
        const DiracMixture isr = apply_backup(is_on_return_spec(c.mdp, c.pi, c.pi, n, x, a), eta);
        CHECK(lp_distance(unc, isr, 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("alt operator examples on the counterexample") {
  const TabularMDP mdp = make_counterexample_mdp();
  const Policy one = uniform_policy(1, 1);
  const DistVector zero(1, 1, DiracMixture::dirac(0.0));
  CHECK(alt_bar_backup(zero, mdp, one, one, kCounterexampleTrace, 0, 0) ==
        DiracMixture::from_atoms({{0.0, -1.0}, {0.5, 1.0}, {1.0, 1.0}}));
  CHECK(alt_tilde_backup(zero, mdp, one, one, kCounterexampleTrace, 0, 0) ==
        DiracMixture::from_atoms({{0.0, -0.5}, {1.0, 1.5}}));
  const DistVector fixed(1, 1, DiracMixture::dirac(2.0));
  CHECK(alt_bar_backup(fixed, mdp, one, one, kCounterexampleTrace, 0, 0) == DiracMixture::dirac(2.0));
  CHECK(alt_tilde_backup(fixed, mdp, one, one, kCounterexampleTrace, 0, 0) == DiracMixture::dirac(2.0));
  CHECK(retrace_backup(fixed, mdp, one, one, kCounterexampleTrace, 0, 0) == DiracMixture::dirac(2.0));
  CHECK(bellman_backup(fixed, mdp, one, 0, 0) == DiracMixture::dirac(2.0));
}

TEST_CASE("every operator fixes the exact return distribution") {
  const TabularMDP mdp = acyclic_mdp();
  Rng rng(13);
  for (int k = 0; k < 5; ++k) {
    const Policy pi = random_stochastic_policy(4, 2, rng);
    const Policy mu = random_stochastic_policy(4, 2, rng);
    const DistVector truth = exact_eta(mdp, pi);
    CHECK(mean_vector(truth).isApprox(q_values(mdp, pi), 1e-12));
    const TraceConfig tc = random_trace(rng, 3);
    for (OperatorKind kind : {OperatorKind::bellman, OperatorKind::retrace, OperatorKind::alt_bar, OperatorKind::alt_tilde}) {
      const DistOperator op(kind, mdp, pi, mu, tc);
      CHECK(max_l1(op(truth), truth) <= 1e-12);
      CHECK(sup_distance(op(truth), truth, Metric::cramer, 2.0) <= 1e-10);
    }
  }
}

TEST_CASE("pushforward translation identity at the fixed point") {
  Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(1000, -5.0, 8.0);
  auto same_cdf = [&](const DiracMixture& l, const DiracMixture& r) {
    for (double y : grid)
      if (std::abs(cdf(l, y) - cdf(r, y)) > 1e-12) return false;
    return true;
  };
  const TabularMDP cx = make_counterexample_mdp();
  const Policy one = uniform_policy(1, 1);
  const DistVector cx_truth(1, 1, DiracMixture::dirac(2.0));
  const TabularMDP mdp = acyclic_mdp();
  Rng rng(14);
  const Policy pi = random_stochastic_policy(4, 2, rng);
  const DistVector truth = exact_eta(mdp, pi);
  for (double c : {-1.0, 0.0, 1.0}) {
    CHECK(same_cdf(pushforward(cx_truth[0], c, 1.0), pushforward(bellman_backup(cx_truth, cx, one, 0, 0), c, 1.0)));
    for (int x = 0; x < 2; ++x)
      for (int a = 0; a < 2; ++a) {
        // Right side built term by term: E[(b_{c+R, gamma})_# eta(X1, A1)].
        std::vector<std::pair<double, DiracMixture>> terms;
        for (const auto& r : mdp.rewards(x, a))
          for (int y = 0; y < 4; ++y)
            for (int b = 0; b < 2; ++b) {
              const double w = r.prob * mdp.transition(x, a)(y) * pi(y, b);
              if (w > 0.0) terms.emplace_back(w, pushforward(truth.at(y, b), c + r.value, mdp.gamma()));
            }
        CHECK(same_cdf(pushforward(truth.at(x, a), c, 1.0), combine(terms)));
      }
  }
}

TEST_CASE("off-policy fixed points: retrace keeps Q^pi, uncorrected and misplaced IS do not") {
  Rng rng(15);
  const TabularMDP mdp = make_random_mdp(3, 2, 2, 0.5, 0.9);
  const Policy mu = uniform_policy(2, 2);
  const Policy pi = deterministic_policy({0, 1}, 2);
  const Eigen::VectorXd grid = uniform_grid(default_vmax(mdp), 201);
  const Projection proj = Projection::categorical(grid);
  const DistVector start = constant_dist_vector(mdp, DiracMixture::dirac(0.0));
  const Eigen::VectorXd qpi = q_values(mdp, pi);

  const DistOperator retrace(OperatorKind::retrace, mdp, pi, mu, TraceConfig::clipped(1.0, 3));
  const FixedPointResult rfp = iterate_to_fixed_point(retrace, proj, start, 1e-12, 2000);
  CHECK(rfp.last_change <= 1e-12);
  // The categorical projection preserves means inside the grid.
  CHECK((mean_vector(rfp.eta) - qpi).cwiseAbs().maxCoeff() <= 1e-8);

  const DistOperator unc(OperatorKind::uncorrected, mdp, pi, mu, TraceConfig::clipped(1.0, 3), 4);
  const DistOperator isr(OperatorKind::is_on_return, mdp, pi, mu, TraceConfig::clipped(1.0, 3), 4);
  for (const DistOperator* op : {&unc, &isr}) {
    const FixedPointResult fp = iterate_to_fixed_point(*op, proj, start, 1e-12, 2000);
    CHECK(sup_distance(fp.eta, rfp.eta, Metric::cramer, 2.0) > 1e-3);
  }
}

TEST_CASE("dp_iterate on the counterexample") {
  const TabularMDP mdp = make_counterexample_mdp();
  const Policy one = uniform_policy(1, 1);
  const DistVector start(1, 1, DiracMixture::dirac(0.0));
  const std::vector<Reference> refs{{"eta_pi", DistVector(1, 1, DiracMixture::dirac(2.0))}};
  const std::vector<DistanceSpec> dists{parse_distance("L2")};

  const DistOperator retrace(OperatorKind::retrace, mdp, one, one, kCounterexampleTrace);
  const IterateLog log = dp_iterate(retrace, Projection::none(), start, 30, refs, dists);
  REQUIRE(log.iterates.size() == 31);
  REQUIRE(log.rows.size() == 31);
  for (std::size_t k = 1; k < log.rows.size(); ++k) {
    CHECK(log.rows[k].iteration == static_cast<int>(k));
    CHECK(log.rows[k].value <= log.rows[k - 1].value);
  }
  CHECK(log.rows.back().value < 1e-8);

  std::ostringstream os;
  write_iterate_csv(os, log);
  CHECK(os.str().rfind("iteration,metric_name,reference_name,value\n", 0) == 0);

  const DistOperator alt(OperatorKind::alt_bar, mdp, one, one, kCounterexampleTrace);
  CHECK_THROWS_AS(dp_iterate(alt, Projection::quantile(3), start, 2, refs, dists), domain_error);
}

TEST_CASE("projected one-step iteration contracts by gamma in W_inf") {
  Rng rng(16);
  const TabularMDP mdp = make_random_mdp(4, 3, 2, 0.5, 0.9);
  const Policy pi = random_stochastic_policy(3, 2, rng);
  const DistOperator op(OperatorKind::bellman, mdp, pi, pi, TraceConfig::constant(0.0, 1));
  const Projection proj = Projection::quantile(20);
  DistVector prev = random_eta(mdp, rng, 5);
  DistVector cur = op(prev, proj);
  for (int k = 0; k < 15; ++k) {
    const DistVector next = op(cur, proj);
    CHECK(sup_distance(next, cur, Metric::wasserstein, kInfinity) <=
          mdp.gamma() * sup_distance(cur, prev, Metric::wasserstein, kInfinity) + 1e-10);
    prev = cur;
    cur = next;
  }
}

TEST_CASE("ground truth agrees with Monte-Carlo returns") {
  Rng rng(17);
  const TabularMDP mdp = stochastic_reward_mdp(5, 3, 2, 0.8);
  const Policy pi = random_stochastic_policy(3, 2, rng);
  const DistVector truth = ground_truth_eta(mdp, pi, 1000, 200);
  for (int i = 0; i < mdp.num_pairs(); i += 2) {
    const auto [x, a] = mdp.pair(i);
    std::vector<double> g = oracle::mc_returns(mdp, pi, x, a, 20000, rng);
    std::vector<Atom> atoms;
    for (double v : g) atoms.push_back({v, 1.0 / static_cast<double>(g.size())});
    const DiracMixture empirical = DiracMixture::from_atoms(std::move(atoms));
    // Sampling error of W_1 at 2e4 draws is a few hundredths for this spread.
    CHECK(wasserstein(truth[i], empirical, 1.0) < 0.05);
  }
}

TEST_CASE("operator names and distances parse") {
  for (OperatorKind k : {OperatorKind::bellman, OperatorKind::retrace, OperatorKind::uncorrected,
                         OperatorKind::alt_bar, OperatorKind::alt_tilde, OperatorKind::is_on_return})
    CHECK(operator_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(operator_kind_from_string("nope"), parameter_error);
  CHECK(parse_distance("W1").metric == Metric::wasserstein);
  CHECK(parse_distance("L2").p == 2.0);
  CHECK(parse_distance("Winf").p == kInfinity);
  CHECK_THROWS_AS(parse_distance("X3"), parameter_error);
}
