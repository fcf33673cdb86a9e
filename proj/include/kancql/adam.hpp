#pragma once

#include <cstdint>

#include "kancql/matrix.hpp"

namespace kancql {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moments for one parameter tensor.
struct AdamState {
  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols, AdamConfig config)
      : m(rows, cols), v(rows, cols), cfg(config) {}
  explicit AdamState(const Matrix& like, AdamConfig config)
      : AdamState(like.rows(), like.cols(), config) {}

  Matrix m;
  Matrix v;
  std::uint64_t t = 0;
  AdamConfig cfg;
};

// Bias-corrected Adam. Returns the updated parameter and advances `st`.
Matrix adam_step(const Matrix& param, const Matrix& grad, AdamState& st);
void adam_update(Matrix& param, const Matrix& grad, AdamState& st);

}  // namespace kancql
