#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "distret/errors.hpp"

namespace distret {

struct Atom {
  double location = 0.0;
  double weight = 0.0;
  friend bool operator==(const Atom&, const Atom&) = default;
};

/// Finite signed measure sum_i w_i delta_{z_i}.
///
/// Atoms are kept sorted by location with exact duplicates merged and exactly
/// zero weights dropped, so two mixtures describing the same measure compare
/// equal atom-for-atom.
class DiracMixture {
 public:
  DiracMixture() = default;

  static DiracMixture dirac(double location, double weight = 1.0);
  static DiracMixture from_atoms(std::vector<Atom> atoms);
  /// Same result as from_atoms when atoms[run_ends[r-1], run_ends[r]) are each
  /// already sorted; merges runs pairwise instead of sorting.
  static DiracMixture from_sorted_runs(std::vector<Atom> atoms, std::vector<std::size_t> run_ends);
  /// Equal-weight mixture (1/m) sum delta_{z_i}.
  static DiracMixture uniform(std::span<const double> locations);

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }

  double total_mass() const;
  double mean() const;
  /// Unit mass within `mass_tol` and no weight below -1e-12.
  bool is_probability(double mass_tol = 1e-10) const;

  friend bool operator==(const DiracMixture&, const DiracMixture&) = default;

 private:
  std::vector<Atom> atoms_;
};

/// Image under z -> shift + scale * z (scale > 0).
DiracMixture pushforward(const DiracMixture& m, double shift, double scale);

/// sum_k coef_k * m_k as one merged mixture.
DiracMixture combine(std::span<const std::pair<double, DiracMixture>> terms);
DiracMixture combine(std::initializer_list<std::pair<double, DiracMixture>> terms);

/// Right-continuous running weight sum F(y) = sum_{z_i <= y} w_i.
double cdf(const DiracMixture& m, double y);

/// Generalized inverse inf{z : F(z) >= tau}. Probability measures only.
double quantile(const DiracMixture& m, double tau);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Exact W_p on the piecewise-constant quantile functions; p may be kInfinity.
double wasserstein(const DiracMixture& m1, const DiracMixture& m2, double p);
double wasserstein_inf(const DiracMixture& m1, const DiracMixture& m2);

/// Exact (int |F1 - F2|^p)^{1/p}; signed inputs allowed if total masses match.
double lp_distance(const DiracMixture& m1, const DiracMixture& m2, double p);

enum class Metric { wasserstein, cramer };

/// max over entries of the chosen base metric.
double sup_metric(std::span<const DiracMixture> v1, std::span<const DiracMixture> v2, Metric metric,
                  double p);

/// Merge runs of atoms lying within `tol` of the run's first atom.
DiracMixture compress(const DiracMixture& m, double tol = 1e-12);

void write_csv(std::ostream& os, const DiracMixture& m);
DiracMixture read_csv(std::istream& is);

}  // namespace distret
