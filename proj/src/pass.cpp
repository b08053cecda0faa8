#include "attriflip/pass.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "attriflip/kernels.hpp"
#include "attriflip/linalg.hpp"

namespace attriflip {

namespace {

std::vector<double> channel_plane(const Image& img, int c) {
  std::vector<double> p(static_cast<std::size_t>(img.height) * img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      p[static_cast<std::size_t>(y) * img.width + x] =
          static_cast<double>(img.at(y, x, c));
  return p;
}

// Rec.601 luminance for alignment; single-channel images pass through.
std::vector<double> luminance(const Image& img) {
  if (img.channels == 1) return channel_plane(img, 0);
  std::vector<double> p(static_cast<std::size_t>(img.height) * img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      p[static_cast<std::size_t>(y) * img.width + x] =
          0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
          0.114 * img.at(y, x, 2);
  return p;
}

double mean_of(const std::vector<double>& v) {
  return kern::ops().sum(v.data(), v.size()) / static_cast<double>(v.size());
}

}  // namespace

double bilinear_sample(const std::vector<double>& plane, int height, int width,
                       double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  int x1 = std::min(x0 + 1, width - 1);
  int y1 = std::min(y0 + 1, height - 1);
  double fx = x - x0, fy = y - y0;
  double top = plane[static_cast<std::size_t>(y0) * width + x0] * (1.0 - fx) +
               plane[static_cast<std::size_t>(y0) * width + x1] * fx;
  double bot = plane[static_cast<std::size_t>(y1) * width + x0] * (1.0 - fx) +
               plane[static_cast<std::size_t>(y1) * width + x1] * fx;
  return top * (1.0 - fy) + bot * fy;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b,
                  int height, int width, const SsimConfig& cfg) {
  const int win = cfg.window;
  if (win < 1 || win > height || win > width)
    throw std::invalid_argument("ssim: window larger than image");
  if (a.size() != b.size() ||
      a.size() != static_cast<std::size_t>(height) * width)
    throw std::invalid_argument("ssim: plane size mismatch");

  // Summed-area tables over a, b, a^2, b^2, ab; (height+1) x (width+1).
  const int sw = width + 1;
  auto build = [&](auto&& f) {
    std::vector<double> s(static_cast<std::size_t>(height + 1) * sw, 0.0);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        std::size_t i = static_cast<std::size_t>(y) * width + x;
        s[static_cast<std::size_t>(y + 1) * sw + (x + 1)] =
            f(i) + s[static_cast<std::size_t>(y) * sw + (x + 1)] +
            s[static_cast<std::size_t>(y + 1) * sw + x] -
            s[static_cast<std::size_t>(y) * sw + x];
      }
    return s;
  };
  auto sat_a = build([&](std::size_t i) { return a[i]; });
  auto sat_b = build([&](std::size_t i) { return b[i]; });
  auto sat_aa = build([&](std::size_t i) { return a[i] * a[i]; });
  auto sat_bb = build([&](std::size_t i) { return b[i] * b[i]; });
  auto sat_ab = build([&](std::size_t i) { return a[i] * b[i]; });

  auto window_sum = [&](const std::vector<double>& s, int y, int x) {
    return s[static_cast<std::size_t>(y + win) * sw + (x + win)] -
           s[static_cast<std::size_t>(y) * sw + (x + win)] -
           s[static_cast<std::size_t>(y + win) * sw + x] +
           s[static_cast<std::size_t>(y) * sw + x];
  };

  const double n = static_cast<double>(win) * win;
  const double c1 = cfg.c1(), c2 = cfg.c2();
  double total = 0.0;
  long count = 0;
  for (int y = 0; y + win <= height; ++y) {
    for (int x = 0; x + win <= width; ++x) {
      double sa = window_sum(sat_a, y, x);
      double sb = window_sum(sat_b, y, x);
      double mu_a = sa / n, mu_b = sb / n;
      double var_a = window_sum(sat_aa, y, x) / n - mu_a * mu_a;
      double var_b = window_sum(sat_bb, y, x) / n - mu_b * mu_b;
      double cov = window_sum(sat_ab, y, x) / n - mu_a * mu_b;
      double v = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                 ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      total += v;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double ssim(const Image& a, const Image& b, const SsimConfig& cfg) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c)
    total += ssim_plane(channel_plane(a, c), channel_plane(b, c), a.height,
                        a.width, cfg);
  return total / a.channels;
}

namespace {

Homography homography_from_params(const std::array<double, 8>& p) {
  Homography h;
  h.m = {1.0 + p[0], p[1], p[2], p[3], 1.0 + p[4], p[5], p[6], p[7], 1.0};
  return h;
}

std::vector<double> warp_plane(const std::vector<double>& plane, int height,
                               int width, const Homography& h) {
  std::vector<double> out(plane.size());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      auto [wx, wy] = h.apply(x, y);
      out[static_cast<std::size_t>(y) * width + x] =
          bilinear_sample(plane, height, width, wx, wy);
    }
  return out;
}

}  // namespace

EccResult ecc_align(const Image& moving, const Image& fixed,
                    const EccConfig& cfg) {
  if (!moving.same_shape(fixed))
    throw std::invalid_argument("ecc_align: shape mismatch");
  const int h = fixed.height, w = fixed.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const auto& k = kern::ops();

  std::vector<double> ref = luminance(fixed);
  std::vector<double> mov = luminance(moving);

  double ref_mean = mean_of(ref);
  std::vector<double> ref_zm(n);
  for (std::size_t i = 0; i < n; ++i) ref_zm[i] = ref[i] - ref_mean;
  double ref_norm = std::sqrt(k.dot(ref_zm.data(), ref_zm.data(), n));

  EccResult result;
  result.warp = Homography::identity();

  auto ecc_of = [&](const Homography& warp) {
    std::vector<double> iw = warp_plane(mov, h, w, warp);
    double mw = mean_of(iw);
    for (auto& v : iw) v -= mw;
    double norm_w = std::sqrt(k.dot(iw.data(), iw.data(), n));
    if (ref_norm < 1e-9 || norm_w < 1e-9) return 0.0;
    return k.dot(ref_zm.data(), iw.data(), n) / (ref_norm * norm_w);
  };

  // Degenerate template: correlation undefined, ECC pinned to 0.
  if (ref_norm < 1e-9) return result;
  double identity_ecc = ecc_of(result.warp);
  result.ecc = identity_ecc;

  // Image gradients of the moving image (central differences, replicated
  // border), warped alongside the intensities each iteration.
  std::vector<double> gx(n), gy(n);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
      gx[static_cast<std::size_t>(y) * w + x] =
          (mov[static_cast<std::size_t>(y) * w + xp] -
           mov[static_cast<std::size_t>(y) * w + xm]) /
          static_cast<double>(xp - xm == 0 ? 1 : xp - xm);
      gy[static_cast<std::size_t>(y) * w + x] =
          (mov[static_cast<std::size_t>(yp) * w + x] -
           mov[static_cast<std::size_t>(ym) * w + x]) /
          static_cast<double>(yp - ym == 0 ? 1 : yp - ym);
    }

  std::array<double, 8> p = {0, 0, 0, 0, 0, 0, 0, 0};
  Homography best_warp = Homography::identity();
  double best_ecc = identity_ecc;
  bool converged = false;
  int it = 0;

  std::array<std::vector<double>, 8> jac;  // column-major Jacobian
  for (auto& col : jac) col.resize(n);

  for (it = 1; it <= cfg.max_iterations; ++it) {
    Homography warp = homography_from_params(p);

    std::vector<double> iw(n), gwx(n), gwy(n);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        auto [wx, wy] = warp.apply(x, y);
        std::size_t i = static_cast<std::size_t>(y) * w + x;
        iw[i] = bilinear_sample(mov, h, w, wx, wy);
        gwx[i] = bilinear_sample(gx, h, w, wx, wy);
        gwy[i] = bilinear_sample(gy, h, w, wx, wy);
      }
    double mw = mean_of(iw);
    for (auto& v : iw) v -= mw;
    double norm_w = std::sqrt(k.dot(iw.data(), iw.data(), n));
    if (norm_w < 1e-9) break;  // warped image collapsed to a constant

    double cur_ecc = k.dot(ref_zm.data(), iw.data(), n) / (ref_norm * norm_w);
    if (cur_ecc > best_ecc) {
      best_ecc = cur_ecc;
      best_warp = warp;
    }

    // d warp / d p per pixel, chained with the warped gradients.
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        std::size_t i = static_cast<std::size_t>(y) * w + x;
        double d = p[6] * x + p[7] * y + 1.0;
        auto [wx, wy] = warp.apply(x, y);
        double fx = gwx[i] / d, fy = gwy[i] / d;
        jac[0][i] = fx * x;
        jac[1][i] = fx * y;
        jac[2][i] = fx;
        jac[3][i] = fy * x;
        jac[4][i] = fy * y;
        jac[5][i] = fy;
        jac[6][i] = -(fx * wx) * x - (fy * wy) * x;
        jac[7][i] = -(fx * wx) * y - (fy * wy) * y;
      }
    for (auto& col : jac) {
      double cm = mean_of(col);
      for (auto& v : col) v -= cm;
    }

    std::vector<double> gtg(64, 0.0);
    for (int r = 0; r < 8; ++r)
      for (int c = r; c < 8; ++c) {
        double v = k.dot(jac[r].data(), jac[c].data(), n);
        gtg[static_cast<std::size_t>(r) * 8 + c] = v;
        gtg[static_cast<std::size_t>(c) * 8 + r] = v;
      }
    std::vector<double> g_iw(8), g_ref(8);
    for (int r = 0; r < 8; ++r) {
      g_iw[r] = k.dot(jac[r].data(), iw.data(), n);
      g_ref[r] = k.dot(jac[r].data(), ref_zm.data(), n);
    }

    std::vector<double> hinv_giw;
    try {
      hinv_giw = solve_linear(gtg, g_iw, 8);
    } catch (const std::runtime_error&) {
      break;  // flat Jacobian, nothing to optimize
    }
    double lambda_num = norm_w * norm_w;
    double lambda_den = k.dot(ref_zm.data(), iw.data(), n);
    for (int r = 0; r < 8; ++r) {
      lambda_num -= g_iw[r] * hinv_giw[r];
      lambda_den -= g_ref[r] * hinv_giw[r];
    }
    if (lambda_den <= 0.0) break;  // ECC cannot be increased along this model
    double lambda = lambda_num / lambda_den;

    std::vector<double> g_err(8);
    for (int r = 0; r < 8; ++r) g_err[r] = lambda * g_ref[r] - g_iw[r];
    std::vector<double> delta;
    try {
      delta = solve_linear(gtg, g_err, 8);
    } catch (const std::runtime_error&) {
      break;
    }

    double step_norm = 0.0;
    for (double v : delta) step_norm += v * v;
    step_norm = std::sqrt(step_norm);
    for (int r = 0; r < 8; ++r) p[r] += delta[r];

    if (step_norm < cfg.update_norm_tolerance) {
      converged = true;
      break;
    }
  }

  if (converged) {
    Homography final_warp = homography_from_params(p);
    double final_ecc = ecc_of(final_warp);
    if (final_ecc > best_ecc) {
      best_ecc = final_ecc;
      best_warp = final_warp;
    }
    result.warp = best_warp;
    result.ecc = best_ecc;
    result.converged = true;
  } else {
    // Contract: without convergence, fall back to the identity transform.
    result.warp = Homography::identity();
    result.ecc = identity_ecc;
    result.converged = false;
  }
  result.iterations = it;
  return result;
}

PassScore pass_score(const Image& perturbed, const Image& original, double tau,
                     const EccConfig& ecc_cfg, const SsimConfig& ssim_cfg) {
  if (!perturbed.same_shape(original))
    throw std::invalid_argument("pass_score: shape mismatch");

  EccResult ecc = ecc_align(perturbed, original, ecc_cfg);

  double total = 0.0;
  for (int c = 0; c < original.channels; ++c) {
    std::vector<double> orig_plane = channel_plane(original, c);
    std::vector<double> pert_plane = channel_plane(perturbed, c);
    std::vector<double> aligned = warp_plane(pert_plane, original.height,
                                             original.width, ecc.warp);
    total += ssim_plane(aligned, orig_plane, original.height, original.width,
                        ssim_cfg);
  }

  PassScore score;
  score.warp = ecc.warp;
  score.ecc = ecc.ecc;
  score.ssim_aligned = total / original.channels;
  score.pass = score.ssim_aligned;
  score.adversarial_ok = score.pass >= tau;
  score.align_converged = ecc.converged;
  return score;
}

}  // namespace attriflip
