#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

#include "kancql/matrix.hpp"

namespace kancql {

// xoshiro256** seeded through splitmix64. Child streams are derived from the
// construction seed and a label, so splitting never depends on how many
// values the parent has already produced.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  Rng split(std::string_view label) const;

  std::uint64_t seed() const { return seed_; }
  const std::array<std::uint64_t, 4>& state() const { return s_; }

  result_type operator()();
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

  bool operator==(const Rng&) const = default;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

Matrix gaussian_sample(Rng& rng, std::size_t rows, std::size_t cols);
Matrix uniform_sample(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi);

}  // namespace kancql
