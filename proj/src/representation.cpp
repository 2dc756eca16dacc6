#include "distret/representation.hpp"

#include <algorithm>
#include <cmath>

#include "distret/mdp.hpp"

namespace distret {

bool CategoricalRep::is_probability() const {
  return (probs.array() >= -1e-12).all() && std::abs(probs.sum() - 1.0) <= 1e-10;
}

Eigen::VectorXd uniform_grid(double vmax, int num_atoms) {
  if (num_atoms < 2) throw parameter_error("uniform_grid: need at least 2 atoms");
  if (!(vmax > 0.0)) throw parameter_error("uniform_grid: vmax must be positive");
  return Eigen::VectorXd::LinSpaced(num_atoms, -vmax, vmax);
}

double default_vmax(const TabularMDP& mdp) {
  const double bound = mdp.return_bound();
  return bound > 0.0 ? bound : 1.0;
}

QuantileRep project_quantile(const DiracMixture& m, int num_atoms) {
  if (num_atoms < 1) throw parameter_error("project_quantile: num_atoms must be >= 1");
  if (!m.is_probability()) throw domain_error("project_quantile: input is not a probability measure");
  QuantileRep rep;
  rep.locations.resize(static_cast<std::size_t>(num_atoms));
  // Single pass: levels are increasing, so walk the atoms once.
  const auto& atoms = m.atoms();
  const double total = m.total_mass();
  std::size_t k = 0;
  double acc = atoms.empty() ? 0.0 : atoms[0].weight;
  for (int i = 0; i < num_atoms; ++i) {
    const double tau = quantile_level(i, num_atoms);
    while (k + 1 < atoms.size() && acc / total < tau - 1e-14) acc += atoms[++k].weight;
    rep.locations[static_cast<std::size_t>(i)] = atoms[k].location;
  }
  return rep;
}

void accumulate_categorical(const DiracMixture& m, const Eigen::VectorXd& support, double coef,
                            double shift, double scale, Eigen::Ref<Eigen::VectorXd> out) {
  const Eigen::Index n = support.size();
  const double lo = support[0];
  const double hi = support[n - 1];
  for (const auto& a : m.atoms()) {
    const double z = std::clamp(shift + scale * a.location, lo, hi);
    const double w = coef * a.weight;
    const double* begin = support.data();
    const double* it = std::upper_bound(begin, begin + n, z);
    Eigen::Index k = static_cast<Eigen::Index>(it - begin) - 1;  // support[k] <= z
    if (k >= n - 1) {
      out[n - 1] += w;
      continue;
    }
    const double left = support[k];
    const double right = support[k + 1];
    const double frac_left = (right - z) / (right - left);
    out[k] += w * frac_left;
    out[k + 1] += w * (1.0 - frac_left);
  }
}

CategoricalRep project_categorical(const DiracMixture& m, const Eigen::VectorXd& support) {
  if (support.size() < 2) throw parameter_error("project_categorical: support needs at least 2 points");
  for (Eigen::Index i = 1; i < support.size(); ++i)
    if (!(support[i] > support[i - 1])) throw parameter_error("project_categorical: support must be increasing");
  CategoricalRep rep{support, Eigen::VectorXd::Zero(support.size())};
  accumulate_categorical(m, support, 1.0, 0.0, 1.0, rep.probs);
  return rep;
}

DiracMixture rep_to_mixture(const QuantileRep& rep) { return DiracMixture::uniform(rep.locations); }

DiracMixture rep_to_mixture(const CategoricalRep& rep) {
  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(rep.support.size()));
  for (Eigen::Index i = 0; i < rep.support.size(); ++i) atoms.push_back({rep.support[i], rep.probs[i]});
  return DiracMixture::from_atoms(std::move(atoms));
}

}  // namespace distret
