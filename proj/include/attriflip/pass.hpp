#pragma once

#include <array>
#include <utility>

#include "attriflip/image.hpp"

namespace attriflip {

// 3x3 projective transform, row-major, normalized so m[8] == 1.
struct Homography {
  std::array<double, 9> m = {1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Homography identity() { return {}; }

  // Maps (x, y) in the fixed frame to coordinates in the moving image.
  std::pair<double, double> apply(double x, double y) const {
    double d = m[6] * x + m[7] * y + m[8];
    return {(m[0] * x + m[1] * y + m[2]) / d,
            (m[3] * x + m[4] * y + m[5]) / d};
  }
};

struct SsimConfig {
  int window = 8;           // uniform square window, stride 1
  double dynamic_range = 255.0;
  double k1 = 0.01;
  double k2 = 0.03;

  double c1() const { return k1 * dynamic_range * k1 * dynamic_range; }
  double c2() const { return k2 * dynamic_range * k2 * dynamic_range; }
};

struct EccConfig {
  int max_iterations = 50;
  double update_norm_tolerance = 1e-6;
};

struct EccResult {
  Homography warp;
  double ecc = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Mean SSIM over all windows (per channel, averaged); symmetric. Rejects
// windows larger than the image.
double ssim(const Image& a, const Image& b, const SsimConfig& cfg = {});

// Same formula on real-valued planes; the building block used by ssim() and
// by pass_score() after warping.
double ssim_plane(const std::vector<double>& a, const std::vector<double>& b,
                  int height, int width, const SsimConfig& cfg = {});

// Gauss-Newton maximization of the enhanced correlation coefficient of
// `moving` warped onto `fixed`, over the 8 homography parameters, starting
// from identity. Alignment runs on luminance. If the iteration budget runs
// out without the update norm dropping below tolerance, the identity warp
// and its ECC are returned with converged=false. Zero-variance inputs are
// degenerate: identity warp, ECC defined as 0.
EccResult ecc_align(const Image& moving, const Image& fixed,
                    const EccConfig& cfg = {});

struct PassScore {
  Homography warp;
  double ecc = 0.0;
  double ssim_aligned = 0.0;
  double pass = 0.0;  // == ssim_aligned
  bool adversarial_ok = false;
  bool align_converged = false;
};

// PASS: ECC homography alignment of `perturbed` onto `original`, bilinear
// resampling, then SSIM of the aligned pair.
PassScore pass_score(const Image& perturbed, const Image& original,
                     double tau = 0.95, const EccConfig& ecc_cfg = {},
                     const SsimConfig& ssim_cfg = {});

// Bilinear sample with border clamp; shared by ECC and the PASS resampler.
double bilinear_sample(const std::vector<double>& plane, int height, int width,
                       double x, double y);

}  // namespace attriflip
