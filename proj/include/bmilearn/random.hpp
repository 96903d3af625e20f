#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "bmilearn/matrix.hpp"

namespace bmilearn {

/// Mixes a parent seed with a stream index into an independent child seed.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream);
/// Same, keyed by a stream label ("pretrain", "decoder", ...).
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);

// xoshiro256** seeded through splitmix64. Gaussians use the Marsaglia polar
// method so the draw sequence depends only on IEEE arithmetic plus log/sqrt.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  double gaussian();
  double gaussian(double mean, double std) { return mean + std * gaussian(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  RandomSource child(std::uint64_t stream) const { return RandomSource(derive_seed(seed_, stream)); }
  RandomSource child(std::string_view label) const { return RandomSource(derive_seed(seed_, label)); }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double mean, double std, RandomSource& rng);
Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi, RandomSource& rng);
Vector gaussian_vector(std::size_t n, RandomSource& rng);

}  // namespace bmilearn
