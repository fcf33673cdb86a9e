#pragma once

#include <cstddef>
#include <vector>

#include "kancql/matrix.hpp"

namespace kancql {

// Uniform knot vector over [lo, hi] with `order` extra knots on each side.
//
// With G intervals and spline degree k there are G + 2k + 1 knots and G + k
// basis functions. The basis sums to one on [lo, hi]; outside that range the
// extended knots are used as they are, so values decay to zero beyond
// lo - k*h and hi + k*h.
class SplineGrid {
 public:
  explicit SplineGrid(std::size_t grid_size = 5, std::size_t order = 3, double lo = -1.0,
                      double hi = 1.0);

  std::size_t grid_size() const { return grid_size_; }
  std::size_t order() const { return order_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double spacing() const { return (hi_ - lo_) / static_cast<double>(grid_size_); }
  const std::vector<double>& knots() const { return knots_; }
  std::size_t num_basis() const { return grid_size_ + order_; }

  // Basis values B_0..B_{G+k-1} at x, written to `out` (length num_basis()).
  void eval(double x, double* out) const;
  // Basis values and their first derivatives at x.
  void eval_with_derivative(double x, double* values, double* derivs) const;

  bool operator==(const SplineGrid& o) const = default;

 private:
  // Cox-de Boor up to `degree`; `work` needs knots.size() - 1 slots and holds
  // the degree-`degree` basis in its first knots.size() - 1 - degree entries.
  void cox_de_boor(double x, std::size_t degree, double* work) const;

  std::size_t grid_size_;
  std::size_t order_;
  double lo_;
  double hi_;
  std::vector<double> knots_;
};

// (batch, n_in) -> (batch, n_in * (G+k)); column i*(G+k) + b holds B_b(x[:, i]).
Matrix basis_values(const SplineGrid& grid, const Matrix& x);
// Same layout as basis_values, holding dB_b/dx.
Matrix basis_derivatives(const SplineGrid& grid, const Matrix& x);

}  // namespace kancql
