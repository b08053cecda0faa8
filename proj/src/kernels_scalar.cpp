#include "attriflip/kernels.hpp"

#include <cmath>

namespace attriflip::kern {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

void axpy_scalar(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_scaled_scalar(double* out, const double* x, double w, const double* d,
                       std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + w * d[i];
}

void relu_fwd_scalar(double* out, const double* in, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_bwd_scalar(double* dx, const double* dy, const double* in,
                     std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = in[i] > 0.0 ? dy[i] : 0.0;
}

void sign_scalar(double* out, const double* in, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = in[i] > 0.0 ? 1.0 : (in[i] < 0.0 ? -1.0 : 0.0);
}

void rmsprop_update_scalar(double* theta, double* cache, const double* g,
                           std::size_t n, double rho, double lr, double eps) {
  for (std::size_t i = 0; i < n; ++i) {
    cache[i] = rho * cache[i] + (1.0 - rho) * g[i] * g[i];
    theta[i] -= lr * g[i] / (std::sqrt(cache[i]) + eps);
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops k{
      "scalar",          dot_scalar,      sum_scalar,
      axpy_scalar,       add_scaled_scalar, relu_fwd_scalar,
      relu_bwd_scalar,   sign_scalar,     rmsprop_update_scalar,
  };
  return k;
}

}  // namespace attriflip::kern
