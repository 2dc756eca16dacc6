#pragma once

#include <vector>

#include <Eigen/Core>

#include "distret/measure.hpp"

namespace distret {

class TabularMDP;

/// Quantile level of the i-th atom (0-based) out of m: (2i + 1) / 2m.
inline double quantile_level(int i, int num_atoms) {
  return (2.0 * i + 1.0) / (2.0 * num_atoms);
}

/// m equally weighted atoms, sorted.
struct QuantileRep {
  std::vector<double> locations;

  int num_atoms() const { return static_cast<int>(locations.size()); }
  friend bool operator==(const QuantileRep&, const QuantileRep&) = default;
};

/// Probabilities over a fixed increasing grid.
struct CategoricalRep {
  Eigen::VectorXd support;
  Eigen::VectorXd probs;

  int num_atoms() const { return static_cast<int>(support.size()); }
  /// Entries non-negative and summing to 1 within 1e-10.
  bool is_probability() const;
};

/// Uniform grid over [-vmax, vmax].
Eigen::VectorXd uniform_grid(double vmax, int num_atoms);

/// Grid half-width covering every achievable return of `mdp`.
double default_vmax(const TabularMDP& mdp);

/// W_1-optimal m-atom projection: atoms at the midpoint quantile levels.
QuantileRep project_quantile(const DiracMixture& m, int num_atoms);

/// Cramer-optimal projection onto `support` by linear mass splitting.
///
/// Linear in the input, so it is also defined for signed mixtures; atoms
/// outside the grid are clamped to the nearest end point.
CategoricalRep project_categorical(const DiracMixture& m, const Eigen::VectorXd& support);

/// Unnormalized accumulation of project_categorical into `out`, scaled by
/// `coef`, after mapping each atom through z -> shift + scale * z.
void accumulate_categorical(const DiracMixture& m, const Eigen::VectorXd& support, double coef,
                            double shift, double scale, Eigen::Ref<Eigen::VectorXd> out);

DiracMixture rep_to_mixture(const QuantileRep& rep);
DiracMixture rep_to_mixture(const CategoricalRep& rep);

}  // namespace distret
