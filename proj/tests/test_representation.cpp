#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "distret/mdp.hpp"
#include "distret/representation.hpp"
#include "distret/rng.hpp"

using namespace distret;

namespace {

DiracMixture half01() { return DiracMixture::from_atoms({{0.0, 0.5}, {1.0, 0.5}}); }

DiracMixture random_probability(Rng& rng, int n, double spread = 3.0) {
  std::vector<Atom> atoms;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    atoms.push_back({rng.normal(0.0, spread), rng.uniform(0.1, 1.0)});
    total += atoms.back().weight;
  }
  for (auto& a : atoms) a.weight /= total;
  return DiracMixture::from_atoms(std::move(atoms));
}

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("quantile levels are midpoints") {
  CHECK(quantile_level(0, 2) == 0.25);
  CHECK(quantile_level(1, 2) == 0.75);
  CHECK(quantile_level(0, 1) == 0.5);
}

TEST_CASE("project_quantile examples") {
  CHECK(project_quantile(half01(), 2).locations == std::vector<double>{0.0, 1.0});
  CHECK(project_quantile(half01(), 1).locations == std::vector<double>{0.0});
  for (int m : {1, 3, 10}) CHECK(project_quantile(DiracMixture::dirac(-2.5), m).locations == std::vector<double>(m, -2.5));
  const DiracMixture signed_m = combine({{1.0, DiracMixture::dirac(1.0)}, {1.0, DiracMixture::dirac(0.5)},
                                         {-1.0, DiracMixture::dirac(0.0)}});
  CHECK_THROWS_AS(project_quantile(signed_m, 2), domain_error);
  CHECK_THROWS_AS(project_quantile(half01(), 0), parameter_error);
}

TEST_CASE("project_categorical examples") {
  const CategoricalRep a = project_categorical(DiracMixture::dirac(0.5), vec({0.0, 1.0}));
  CHECK(a.probs[0] == 0.5);
  CHECK(a.probs[1] == 0.5);
  const CategoricalRep b = project_categorical(DiracMixture::dirac(1.0), vec({0.0, 1.0, 2.0}));
  CHECK(b.probs == vec({0.0, 1.0, 0.0}));
  const CategoricalRep c =
      project_categorical(DiracMixture::from_atoms({{0.0, 0.5}, {2.0, 0.5}}), vec({0.0, 1.0, 2.0}));
  CHECK(c.probs == vec({0.5, 0.0, 0.5}));
  // Out-of-range atoms are clamped to the end points.
  const CategoricalRep d = project_categorical(DiracMixture::from_atoms({{-7.0, 0.25}, {9.0, 0.75}}), vec({0.0, 1.0}));
  CHECK(d.probs == vec({0.25, 0.75}));
  CHECK_THROWS_AS(project_categorical(half01(), vec({0.0})), parameter_error);
}

TEST_CASE("rep_to_mixture examples and round trip") {
  CHECK(rep_to_mixture(QuantileRep{{0.0, 1.0}}) == half01());
  CHECK(rep_to_mixture(CategoricalRep{vec({0.0, 1.0}), vec({1.0, 0.0})}) == DiracMixture::dirac(0.0));
  const QuantileRep q{{-1.0, 0.25, 0.5, 3.0}};
  CHECK(project_quantile(rep_to_mixture(q), 4) == q);
  CHECK(rep_to_mixture(q).total_mass() == 1.0);
}

TEST_CASE("uniform grid and default vmax") {
  const Eigen::VectorXd g = uniform_grid(2.0, 5);
  CHECK(g == vec({-2.0, -1.0, 0.0, 1.0, 2.0}));
  CHECK_THROWS_AS(uniform_grid(2.0, 1), parameter_error);
  const TabularMDP cx = make_counterexample_mdp();
  CHECK(default_vmax(cx) >= 2.0);
}

TEST_CASE("quantile projection is a non-expansion in W_inf") {
  Rng rng(10);
  for (int k = 0; k < 200; ++k) {
    const int n = 1 + k % 12;
    const DiracMixture m1 = random_probability(rng, n), m2 = random_probability(rng, n);
    for (int m : {1, 2, 5, 100}) {
      const double lhs = wasserstein_inf(rep_to_mixture(project_quantile(m1, m)), rep_to_mixture(project_quantile(m2, m)));
      CHECK(lhs <= wasserstein_inf(m1, m2) + 1e-12);
    }
  }
}

TEST_CASE("categorical projection is a non-expansion in L_2") {
  Rng rng(11);
  const Eigen::VectorXd grid = uniform_grid(6.0, 25);
  for (int k = 0; k < 200; ++k) {
    const DiracMixture m1 = random_probability(rng, 1 + k % 9, 2.0), m2 = random_probability(rng, 1 + k % 7, 2.0);
    const double lhs = lp_distance(rep_to_mixture(project_categorical(m1, grid)),
                                   rep_to_mixture(project_categorical(m2, grid)), 2.0);
    CHECK(lhs <= lp_distance(m1, m2, 2.0) + 1e-12);
  }
}

TEST_CASE("categorical projection preserves the mean inside the grid") {
  Rng rng(12);
  const Eigen::VectorXd grid = uniform_grid(10.0, 41);
  for (int k = 0; k < 100; ++k) {
    const DiracMixture m = random_probability(rng, 8, 2.0);
    const CategoricalRep c = project_categorical(m, grid);
    CHECK(c.is_probability());
    CHECK(c.probs.dot(c.support) == doctest::Approx(m.mean()).epsilon(1e-12));
  }
}

TEST_CASE("categorical projection is linear over mixtures") {
  Rng rng(13);
  const Eigen::VectorXd grid = uniform_grid(5.0, 11);
  for (int k = 0; k < 50; ++k) {
    std::vector<std::pair<double, DiracMixture>> terms;
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(grid.size());
    for (int j = 0; j < 3; ++j) {
      terms.emplace_back(rng.normal(), random_probability(rng, 4, 2.0));
      expected += terms.back().first * project_categorical(terms.back().second, grid).probs;
    }
    const CategoricalRep c = project_categorical(combine(terms), grid);
    CHECK((c.probs - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("accumulate_categorical matches projecting the pushforward") {
  Rng rng(14);
  const Eigen::VectorXd grid = uniform_grid(8.0, 33);
  for (int k = 0; k < 50; ++k) {
    const DiracMixture m = random_probability(rng, 6, 2.0);
    const double coef = rng.uniform(-1.0, 1.0), shift = rng.normal(), scale = rng.uniform(0.1, 1.0);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.size());
    accumulate_categorical(m, grid, coef, shift, scale, out);
    const Eigen::VectorXd expected = coef * project_categorical(pushforward(m, shift, scale), grid).probs;
    CHECK((out - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("projections are idempotent") {
  Rng rng(15);
  const Eigen::VectorXd grid = uniform_grid(6.0, 13);
  for (int k = 0; k < 100; ++k) {
    const DiracMixture m = random_probability(rng, 1 + k % 15);
    for (int n : {1, 3, 10}) {
      const QuantileRep q = project_quantile(m, n);
      CHECK(project_quantile(rep_to_mixture(q), n) == q);
    }
    const CategoricalRep c = project_categorical(m, grid);
    const CategoricalRep cc = project_categorical(rep_to_mixture(c), grid);
    CHECK((cc.probs - c.probs).cwiseAbs().maxCoeff() <= 1e-15);
  }
}
