#pragma once

#include <cstddef>

// Data-parallel inner loops used by the network engine, the optimizer and the
// image metrics. Every kernel has a scalar reference implementation and may
// have SIMD variants; the active backend is chosen once at startup.
//
// Reductions (dot, sum) accumulate in a backend-specific order, so scalar and
// SIMD results may differ in the last bits for general doubles. For
// integer-valued doubles below 2^53 (pixel sums in the SSIM path) all
// backends are exact and agree bit for bit.

namespace attriflip::kern {

struct Ops {
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);

  // y += a * x
  void (*axpy)(double* y, double a, const double* x, std::size_t n);
  // out = x + w * d
  void (*add_scaled)(double* out, const double* x, double w, const double* d,
                     std::size_t n);

  // out = max(in, 0)
  void (*relu_fwd)(double* out, const double* in, std::size_t n);
  // dx = in > 0 ? dy : 0   (derivative at 0 is 0)
  void (*relu_bwd)(double* dx, const double* dy, const double* in,
                   std::size_t n);

  // out = -1, 0, +1 by sign of in; sign(0) = 0
  void (*sign)(double* out, const double* in, std::size_t n);

  // cache = rho*cache + (1-rho)*g*g;  theta -= lr * g / (sqrt(cache) + eps)
  void (*rmsprop_update)(double* theta, double* cache, const double* g,
                         std::size_t n, double rho, double lr, double eps);
};

// Reference backend, always available.
const Ops& scalar_ops();

// AVX2+FMA backend; nullptr when the build or the CPU lacks support.
const Ops* avx2_ops();

// Backend selected at startup: AVX2 when available, otherwise scalar.
// ATTRIFLIP_KERNELS=scalar|avx2 in the environment forces the choice
// (an unavailable forced backend falls back to scalar).
const Ops& ops();

}  // namespace attriflip::kern
