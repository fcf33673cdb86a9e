#include "kancql/bspline.hpp"

#include <array>
#include <stdexcept>

namespace kancql {

namespace {
constexpr std::size_t kMaxKnots = 64;
}

SplineGrid::SplineGrid(std::size_t grid_size, std::size_t order, double lo, double hi)
    : grid_size_(grid_size), order_(order), lo_(lo), hi_(hi) {
  if (grid_size == 0) throw std::invalid_argument("SplineGrid: grid_size must be >= 1");
  if (!(hi > lo)) throw std::invalid_argument("SplineGrid: require hi > lo");
  const std::size_t n_knots = grid_size + 2 * order + 1;
  if (n_knots > kMaxKnots) throw std::invalid_argument("SplineGrid: too many knots");
  const double h = spacing();
  knots_.resize(n_knots);
  for (std::size_t j = 0; j < n_knots; ++j) {
    knots_[j] = lo + (static_cast<double>(j) - static_cast<double>(order)) * h;
  }
}

void SplineGrid::cox_de_boor(double x, std::size_t degree, double* work) const {
  const std::size_t n0 = knots_.size() - 1;
  for (std::size_t j = 0; j < n0; ++j) {
    work[j] = (x >= knots_[j] && x < knots_[j + 1]) ? 1.0 : 0.0;
  }
  // The last interval is closed so that x = hi is covered when there are no extra knots.
  if (x == knots_[n0]) work[n0 - 1] = 1.0;
  for (std::size_t d = 1; d <= degree; ++d) {
    const std::size_t n = n0 - d;
    for (std::size_t j = 0; j < n; ++j) {
      const double left = (x - knots_[j]) / (knots_[j + d] - knots_[j]);
      const double right = (knots_[j + d + 1] - x) / (knots_[j + d + 1] - knots_[j + 1]);
      work[j] = left * work[j] + right * work[j + 1];
    }
  }
}

void SplineGrid::eval(double x, double* out) const {
  std::array<double, kMaxKnots> work{};
  cox_de_boor(x, order_, work.data());
  for (std::size_t b = 0; b < num_basis(); ++b) out[b] = work[b];
}

void SplineGrid::eval_with_derivative(double x, double* values, double* derivs) const {
  std::array<double, kMaxKnots> work{};
  const std::size_t nb = num_basis();
  if (order_ == 0) {
    cox_de_boor(x, 0, work.data());
    for (std::size_t b = 0; b < nb; ++b) {
      values[b] = work[b];
      derivs[b] = 0.0;
    }
    return;
  }
  // Degree k-1 basis has nb + 1 functions.
  cox_de_boor(x, order_ - 1, work.data());
  const double k = static_cast<double>(order_);
  for (std::size_t b = 0; b < nb; ++b) {
    const double a = k / (knots_[b + order_] - knots_[b]);
    const double c = k / (knots_[b + order_ + 1] - knots_[b + 1]);
    derivs[b] = a * work[b] - c * work[b + 1];
  }
  // One more elevation step gives the degree-k values from the same buffer.
  for (std::size_t b = 0; b < nb; ++b) {
    const double left = (x - knots_[b]) / (knots_[b + order_] - knots_[b]);
    const double right = (knots_[b + order_ + 1] - x) / (knots_[b + order_ + 1] - knots_[b + 1]);
    values[b] = left * work[b] + right * work[b + 1];
  }
}

Matrix basis_values(const SplineGrid& grid, const Matrix& x) {
  const std::size_t nb = grid.num_basis();
  Matrix out(x.rows(), x.cols() * nb);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* dst = out.row(r).data();
    for (std::size_t i = 0; i < x.cols(); ++i) grid.eval(x(r, i), dst + i * nb);
  }
  return out;
}

Matrix basis_derivatives(const SplineGrid& grid, const Matrix& x) {
  const std::size_t nb = grid.num_basis();
  Matrix out(x.rows(), x.cols() * nb);
  std::array<double, kMaxKnots> scratch{};
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* dst = out.row(r).data();
    for (std::size_t i = 0; i < x.cols(); ++i) {
      grid.eval_with_derivative(x(r, i), scratch.data(), dst + i * nb);
    }
  }
  return out;
}

}  // namespace kancql
