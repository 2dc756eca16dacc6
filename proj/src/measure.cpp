#include "distret/measure.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace distret {

namespace {

// Quantile-function segments shorter than this are treated as round-off when
// taking the W_inf maximum.
constexpr double kSegmentTol = 1e-12;
constexpr double kMassTol = 1e-10;

double abs_mass(const DiracMixture& m) {
  double s = 0.0;
  for (const auto& a : m.atoms()) s += std::abs(a.weight);
  return s;
}

bool location_less(const Atom& a, const Atom& b) { return a.location < b.location; }

void merge_sorted_duplicates(std::vector<Atom>& atoms) {
  std::size_t out = 0;
  for (std::size_t i = 0; i < atoms.size();) {
    Atom merged = atoms[i];
    std::size_t j = i + 1;
    while (j < atoms.size() && atoms[j].location == merged.location) merged.weight += atoms[j++].weight;
    if (merged.weight != 0.0) atoms[out++] = merged;
    i = j;
  }
  atoms.resize(out);
}

void sort_and_merge(std::vector<Atom>& atoms) {
  std::sort(atoms.begin(), atoms.end(), location_less);
  merge_sorted_duplicates(atoms);
}

void check_finite(const std::vector<Atom>& atoms) {
  for (const auto& a : atoms)
    if (!std::isfinite(a.location) || !std::isfinite(a.weight))
      throw domain_error("DiracMixture: non-finite atom");
}

void require_probability(const DiracMixture& m, const char* what) {
  if (!m.is_probability()) throw domain_error(std::string(what) + ": input is not a probability measure");
}

/// Cumulative weights normalized so the last entry is exactly 1.
std::vector<double> normalized_cumulative(const DiracMixture& m) {
  const auto& atoms = m.atoms();
  std::vector<double> c(atoms.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    acc += std::max(atoms[i].weight, 0.0);
    c[i] = acc;
  }
  for (auto& v : c) v /= acc;
  return c;
}

}  // namespace

DiracMixture DiracMixture::dirac(double location, double weight) {
  DiracMixture m;
  if (weight != 0.0) m.atoms_.push_back({location, weight});
  return m;
}

DiracMixture DiracMixture::from_atoms(std::vector<Atom> atoms) {
  check_finite(atoms);
  DiracMixture m;
  sort_and_merge(atoms);
  m.atoms_ = std::move(atoms);
  return m;
}

DiracMixture DiracMixture::from_sorted_runs(std::vector<Atom> atoms, std::vector<std::size_t> run_ends) {
  check_finite(atoms);
  if (run_ends.empty() || run_ends.back() != atoms.size())
    throw parameter_error("DiracMixture::from_sorted_runs: run_ends must end at atoms.size()");
  std::vector<Atom> buffer(atoms.size());
  std::vector<std::size_t> bounds{0};
  bounds.insert(bounds.end(), run_ends.begin(), run_ends.end());
  while (bounds.size() > 2) {
    std::vector<std::size_t> next{0};
    for (std::size_t r = 0; r + 1 < bounds.size(); r += 2) {
      const auto lo = static_cast<std::ptrdiff_t>(bounds[r]);
      const auto mid = static_cast<std::ptrdiff_t>(bounds[r + 1]);
      const auto hi = static_cast<std::ptrdiff_t>(r + 2 < bounds.size() ? bounds[r + 2] : bounds[r + 1]);
      std::merge(atoms.begin() + lo, atoms.begin() + mid, atoms.begin() + mid, atoms.begin() + hi,
                 buffer.begin() + lo, location_less);
      next.push_back(static_cast<std::size_t>(hi));
    }
    atoms.swap(buffer);
    bounds.swap(next);
  }
  merge_sorted_duplicates(atoms);
  DiracMixture m;
  m.atoms_ = std::move(atoms);
  return m;
}

DiracMixture DiracMixture::uniform(std::span<const double> locations) {
  if (locations.empty()) throw parameter_error("DiracMixture::uniform: no locations");
  const double w = 1.0 / static_cast<double>(locations.size());
  std::vector<Atom> atoms;
  atoms.reserve(locations.size());
  for (double z : locations) atoms.push_back({z, w});
  return from_atoms(std::move(atoms));
}

double DiracMixture::total_mass() const {
  double s = 0.0;
  for (const auto& a : atoms_) s += a.weight;
  return s;
}

double DiracMixture::mean() const {
  double s = 0.0;
  for (const auto& a : atoms_) s += a.weight * a.location;
  return s;
}

bool DiracMixture::is_probability(double mass_tol) const {
  if (std::abs(total_mass() - 1.0) > mass_tol) return false;
  return std::all_of(atoms_.begin(), atoms_.end(), [](const Atom& a) { return a.weight >= -1e-12; });
}

DiracMixture pushforward(const DiracMixture& m, double shift, double scale) {
  if (!(scale > 0.0)) throw parameter_error("pushforward: scale must be positive");
  std::vector<Atom> atoms;
  atoms.reserve(m.size());
  for (const auto& a : m.atoms()) atoms.push_back({shift + scale * a.location, a.weight});
  // Monotone map: order is preserved, but distinct atoms can collide in floating point.
  return DiracMixture::from_atoms(std::move(atoms));
}

DiracMixture combine(std::span<const std::pair<double, DiracMixture>> terms) {
  std::size_t n = 0;
  for (const auto& [coef, m] : terms) n += m.size();
  std::vector<Atom> atoms;
  atoms.reserve(n);
  for (const auto& [coef, m] : terms) {
    if (coef == 0.0) continue;
    for (const auto& a : m.atoms()) atoms.push_back({a.location, coef * a.weight});
  }
  return DiracMixture::from_atoms(std::move(atoms));
}

DiracMixture combine(std::initializer_list<std::pair<double, DiracMixture>> terms) {
  return combine(std::span<const std::pair<double, DiracMixture>>(terms.begin(), terms.size()));
}

double cdf(const DiracMixture& m, double y) {
  double acc = 0.0;
  for (const auto& a : m.atoms()) {
    if (a.location > y) break;
    acc += a.weight;
  }
  return acc;
}

double quantile(const DiracMixture& m, double tau) {
  require_probability(m, "quantile");
  if (!(tau >= 0.0 && tau <= 1.0)) throw parameter_error("quantile: tau must lie in [0, 1]");
  const auto& atoms = m.atoms();
  const double total = m.total_mass();
  double acc = 0.0;
  for (const auto& a : atoms) {
    acc += a.weight;
    // Relative slack absorbs summation round-off at exact breakpoints.
    if (acc / total >= tau - 1e-14) return a.location;
  }
  return atoms.back().location;
}

double wasserstein(const DiracMixture& m1, const DiracMixture& m2, double p) {
  if (std::isinf(p)) return wasserstein_inf(m1, m2);
  if (!(p >= 1.0)) throw parameter_error("wasserstein: p must be >= 1");
  require_probability(m1, "wasserstein");
  require_probability(m2, "wasserstein");
  const auto& a1 = m1.atoms();
  const auto& a2 = m2.atoms();
  const auto c1 = normalized_cumulative(m1);
  const auto c2 = normalized_cumulative(m2);
  std::size_t i = 0, j = 0;
  double prev = 0.0, acc = 0.0;
  while (i < a1.size() && j < a2.size()) {
    const double next = std::min(c1[i], c2[j]);
    const double len = next - prev;
    if (len > 0.0) acc += std::pow(std::abs(a1[i].location - a2[j].location), p) * len;
    prev = std::max(prev, next);
    if (c1[i] <= next) ++i;
    if (c2[j] <= next) ++j;
  }
  return std::pow(acc, 1.0 / p);
}

double wasserstein_inf(const DiracMixture& m1, const DiracMixture& m2) {
  require_probability(m1, "wasserstein_inf");
  require_probability(m2, "wasserstein_inf");
  const auto& a1 = m1.atoms();
  const auto& a2 = m2.atoms();
  const auto c1 = normalized_cumulative(m1);
  const auto c2 = normalized_cumulative(m2);
  std::size_t i = 0, j = 0;
  double prev = 0.0, best = 0.0;
  while (i < a1.size() && j < a2.size()) {
    const double next = std::min(c1[i], c2[j]);
    if (next - prev > kSegmentTol) best = std::max(best, std::abs(a1[i].location - a2[j].location));
    prev = std::max(prev, next);
    if (c1[i] <= next) ++i;
    if (c2[j] <= next) ++j;
  }
  return best;
}

double lp_distance(const DiracMixture& m1, const DiracMixture& m2, double p) {
  if (!(p >= 1.0) || std::isinf(p)) throw parameter_error("lp_distance: p must be finite and >= 1");
  const double mass1 = m1.total_mass();
  const double mass2 = m2.total_mass();
  if (std::abs(mass1 - mass2) > kMassTol * std::max({1.0, abs_mass(m1), abs_mass(m2)}))
    throw domain_error("lp_distance: total masses differ, the CDF gap does not vanish");
  const auto& a1 = m1.atoms();
  const auto& a2 = m2.atoms();
  std::size_t i = 0, j = 0;
  double f1 = 0.0, f2 = 0.0, acc = 0.0;
  double y = 0.0;
  bool started = false;
  while (i < a1.size() || j < a2.size()) {
    const double next = (j >= a2.size() || (i < a1.size() && a1[i].location <= a2[j].location))
                            ? a1[i].location
                            : a2[j].location;
    if (started) acc += std::pow(std::abs(f1 - f2), p) * (next - y);
    while (i < a1.size() && a1[i].location == next) f1 += a1[i++].weight;
    while (j < a2.size() && a2[j].location == next) f2 += a2[j++].weight;
    y = next;
    started = true;
  }
  return std::pow(acc, 1.0 / p);
}

double sup_metric(std::span<const DiracMixture> v1, std::span<const DiracMixture> v2, Metric metric,
                  double p) {
  if (v1.size() != v2.size()) throw parameter_error("sup_metric: index sets differ");
  double best = 0.0;
  for (std::size_t k = 0; k < v1.size(); ++k) {
    const double d = metric == Metric::wasserstein ? wasserstein(v1[k], v2[k], p) : lp_distance(v1[k], v2[k], p);
    best = std::max(best, d);
  }
  return best;
}

DiracMixture compress(const DiracMixture& m, double tol) {
  if (tol < 0.0) throw parameter_error("compress: tol must be non-negative");
  if (tol == 0.0) return m;
  const bool probability = m.is_probability();
  const auto& atoms = m.atoms();
  std::vector<Atom> out;
  out.reserve(atoms.size());
  for (std::size_t i = 0; i < atoms.size();) {
    const double first = atoms[i].location;
    double w = 0.0, wz = 0.0;
    std::size_t j = i;
    while (j < atoms.size() && atoms[j].location - first < tol) {
      w += atoms[j].weight;
      wz += atoms[j].weight * atoms[j].location;
      ++j;
    }
    const double loc = (probability && j - i > 1 && w > 0.0) ? wz / w : first;
    out.push_back({loc, w});
    i = j;
  }
  return DiracMixture::from_atoms(std::move(out));
}

void write_csv(std::ostream& os, const DiracMixture& m) {
  os << "location,weight\n";
  os << std::setprecision(17);
  for (const auto& a : m.atoms()) os << a.location << "," << a.weight << "\n";
}

DiracMixture read_csv(std::istream& is) {
  std::string line;
  std::vector<Atom> atoms;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line.rfind("location", 0) == 0) continue;
    }
    std::istringstream ls(line);
    Atom a;
    char comma = 0;
    if (!(ls >> a.location >> comma >> a.weight) || comma != ',')
      throw parameter_error("read_csv: malformed row '" + line + "'");
    atoms.push_back(a);
  }
  return DiracMixture::from_atoms(std::move(atoms));
}

}  // namespace distret
