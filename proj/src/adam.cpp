#include "kancql/adam.hpp"

#include <cmath>

namespace kancql {

Matrix adam_step(const Matrix& param, const Matrix& grad, AdamState& st) {
  Matrix out = param;
  adam_update(out, grad, st);
  return out;
}

void adam_update(Matrix& param, const Matrix& grad, AdamState& st) {
  require_same_shape(param, grad, "adam_step(param, grad)");
  require_same_shape(param, st.m, "adam_step(param, m)");
  require_same_shape(param, st.v, "adam_step(param, v)");

  st.t += 1;
  const double b1 = st.cfg.beta1;
  const double b2 = st.cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
  const double lr = st.cfg.lr;
  const double eps = st.cfg.eps;

  auto p = param.values();
  auto m = st.m.values();
  auto v = st.v.values();
  const auto g = grad.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
  }
}

}  // namespace kancql
