#include "distret/rng.hpp"

#include <stdexcept>

namespace distret {

namespace {

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(mix(seed_ ^ mix(stream + 0x5bd1e995ULL)));
}

Rng Rng::split(std::string_view name) const { return split(fnv1a(name)); }

double Rng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double Rng::normal(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

Eigen::Index Rng::categorical(const Eigen::Ref<const Eigen::VectorXd>& probs) {
  const double total = probs.sum();
  if (!(total > 0.0)) throw std::invalid_argument("categorical: weights must have positive sum");
  const double u = uniform(0.0, total);
  double acc = 0.0;
  Eigen::Index last_positive = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last_positive;
}

Eigen::VectorXd Rng::dirichlet(Eigen::Index dim, double concentration) {
  if (dim < 1 || !(concentration > 0.0))
    throw std::invalid_argument("dirichlet: need dim >= 1 and concentration > 0");
  std::gamma_distribution<double> gamma(concentration, 1.0);
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = gamma(engine_);
  double s = v.sum();
  // Tiny concentrations can underflow every draw; fall back to a vertex.
  if (!(s > 0.0)) {
    v.setZero();
    v[static_cast<Eigen::Index>(engine_() % static_cast<std::uint64_t>(dim))] = 1.0;
    return v;
  }
  return v / s;
}

}  // namespace distret
