#pragma once

#include <span>
#include <string>

namespace attriflip {

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  bool degenerate = false;
  std::string note;
};

// Two-sided paired t-test on elementwise differences a - b. Lists must have
// equal length >= 2. Zero-variance inputs are reported as degenerate rather
// than given a fabricated p-value.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b); exposed for direct testing.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided p-value of a t statistic with the given degrees of freedom.
double student_t_two_sided_p(double t, double dof);

}  // namespace attriflip
