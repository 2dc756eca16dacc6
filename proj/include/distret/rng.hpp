#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace distret {

/// Seedable 64-bit generator with deterministic stream splitting.
///
/// `split(stream)` derives an independent child generator from the parent's
/// seed and a stream id; it does not advance the parent. Named splits hash the
/// name into the stream id so sweep cells can be reproduced individually.
class Rng {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  Rng split(std::uint64_t stream) const;
  Rng split(std::string_view name) const;

  result_type operator()() { return engine_(); }
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }

  double uniform(double lo = 0.0, double hi = 1.0);
  double normal(double mean = 0.0, double stddev = 1.0);
  /// Index drawn from a (non-negative, unnormalized) weight vector.
  Eigen::Index categorical(const Eigen::Ref<const Eigen::VectorXd>& probs);
  Eigen::VectorXd dirichlet(Eigen::Index dim, double concentration);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace distret
