#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace attriflip {

// Solves A x = b for a small dense n-by-n row-major system with partial
// pivoting. A and b are consumed. Throws on a (numerically) singular matrix.
inline std::vector<double> solve_linear(std::vector<double> a,
                                        std::vector<double> b, int n) {
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double best = std::fabs(a[static_cast<std::size_t>(col) * n + col]);
    for (int r = col + 1; r < n; ++r) {
      double v = std::fabs(a[static_cast<std::size_t>(r) * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best < 1e-14) throw std::runtime_error("solve_linear: singular system");
    if (pivot != col) {
      for (int c = 0; c < n; ++c)
        std::swap(a[static_cast<std::size_t>(pivot) * n + c],
                  a[static_cast<std::size_t>(col) * n + c]);
      std::swap(b[pivot], b[col]);
    }
    double diag = a[static_cast<std::size_t>(col) * n + col];
    for (int r = col + 1; r < n; ++r) {
      double f = a[static_cast<std::size_t>(r) * n + col] / diag;
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c)
        a[static_cast<std::size_t>(r) * n + c] -=
            f * a[static_cast<std::size_t>(col) * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c)
      s -= a[static_cast<std::size_t>(r) * n + c] * x[c];
    x[r] = s / a[static_cast<std::size_t>(r) * n + r];
  }
  return x;
}

}  // namespace attriflip
