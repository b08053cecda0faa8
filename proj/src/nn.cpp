#include "attriflip/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "attriflip/kernels.hpp"
#include "attriflip/rng.hpp"

namespace attriflip {

namespace {

void check_label(AttributeLabel y) {
  if (y != -1 && y != 1)
    throw std::invalid_argument("label must be -1 or +1");
}

Shape3 infer_shape(const Shape3& in, const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::Conv: {
      if (spec.kernel < 1 || spec.stride < 1 || spec.pad < 0 ||
          spec.out_channels < 1)
        throw std::invalid_argument("conv: bad layer parameters");
      int oh = (in.height + 2 * spec.pad - spec.kernel) / spec.stride + 1;
      int ow = (in.width + 2 * spec.pad - spec.kernel) / spec.stride + 1;
      if (oh < 1 || ow < 1)
        throw std::invalid_argument("conv: kernel larger than padded input");
      return {spec.out_channels, oh, ow};
    }
    case LayerKind::MaxPool: {
      if (spec.kernel < 1 || spec.stride < 1)
        throw std::invalid_argument("max-pool: bad layer parameters");
      int oh = (in.height - spec.kernel) / spec.stride + 1;
      int ow = (in.width - spec.kernel) / spec.stride + 1;
      if (oh < 1 || ow < 1)
        throw std::invalid_argument("max-pool: window larger than input");
      return {in.channels, oh, ow};
    }
    case LayerKind::FullyConnected:
      if (spec.units < 1)
        throw std::invalid_argument("fully-connected: bad unit count");
      return {spec.units, 1, 1};
    case LayerKind::Relu:
      return in;
  }
  throw std::logic_error("unknown layer kind");
}

// Patch size of a conv layer (input channels * kernel * kernel).
int conv_patch_size(const Shape3& in, const LayerSpec& spec) {
  return in.channels * spec.kernel * spec.kernel;
}

void im2col(const double* in, const Shape3& is, const LayerSpec& spec,
            const Shape3& os, std::vector<double>& col) {
  const int K = conv_patch_size(is, spec);
  const int P = os.height * os.width;
  col.assign(static_cast<std::size_t>(P) * K, 0.0);
  for (int oy = 0; oy < os.height; ++oy) {
    for (int ox = 0; ox < os.width; ++ox) {
      double* patch = col.data() + (static_cast<std::size_t>(oy) * os.width + ox) * K;
      int idx = 0;
      for (int c = 0; c < is.channels; ++c) {
        for (int ky = 0; ky < spec.kernel; ++ky) {
          int iy = oy * spec.stride - spec.pad + ky;
          for (int kx = 0; kx < spec.kernel; ++kx, ++idx) {
            int ix = ox * spec.stride - spec.pad + kx;
            if (iy >= 0 && iy < is.height && ix >= 0 && ix < is.width)
              patch[idx] =
                  in[(static_cast<std::size_t>(c) * is.height + iy) * is.width + ix];
          }
        }
      }
    }
  }
}

void col2im_add(const std::vector<double>& dcol, const Shape3& is,
                const LayerSpec& spec, const Shape3& os, double* din) {
  const int K = conv_patch_size(is, spec);
  for (int oy = 0; oy < os.height; ++oy) {
    for (int ox = 0; ox < os.width; ++ox) {
      const double* patch =
          dcol.data() + (static_cast<std::size_t>(oy) * os.width + ox) * K;
      int idx = 0;
      for (int c = 0; c < is.channels; ++c) {
        for (int ky = 0; ky < spec.kernel; ++ky) {
          int iy = oy * spec.stride - spec.pad + ky;
          for (int kx = 0; kx < spec.kernel; ++kx, ++idx) {
            int ix = ox * spec.stride - spec.pad + kx;
            if (iy >= 0 && iy < is.height && ix >= 0 && ix < is.width)
              din[(static_cast<std::size_t>(c) * is.height + iy) * is.width + ix] +=
                  patch[idx];
          }
        }
      }
    }
  }
}

}  // namespace

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < specs.size(); ++i)
    n += weights[i].size() + biases[i].size();
  return n;
}

Network make_network(Shape3 input, std::vector<LayerSpec> specs, LossKind loss,
                     std::uint64_t seed) {
  if (input.size() <= 0) throw std::invalid_argument("bad input shape");
  Network net;
  net.input = input;
  net.specs = std::move(specs);
  net.loss = loss;

  Shape3 cur = input;
  for (const auto& spec : net.specs) {
    cur = infer_shape(cur, spec);
    net.shapes.push_back(cur);
  }
  if (net.shapes.empty() || net.shapes.back().size() != net.outputs())
    throw std::invalid_argument(
        "final layer must emit the decision outputs (1 Euclidean / 2 softmax)");

  Rng rng(seed);
  cur = input;
  for (std::size_t i = 0; i < net.specs.size(); ++i) {
    const auto& spec = net.specs[i];
    std::vector<double> w, b;
    if (spec.kind == LayerKind::Conv) {
      int K = conv_patch_size(cur, spec);
      double limit = std::sqrt(6.0 / (K + spec.out_channels * spec.kernel *
                                              spec.kernel));
      w.resize(static_cast<std::size_t>(spec.out_channels) * K);
      for (auto& v : w) v = rand_range(rng, -limit, limit);
      b.assign(spec.out_channels, 0.0);
    } else if (spec.kind == LayerKind::FullyConnected) {
      int fan_in = cur.size();
      double limit = std::sqrt(6.0 / (fan_in + spec.units));
      w.resize(static_cast<std::size_t>(spec.units) * fan_in);
      for (auto& v : w) v = rand_range(rng, -limit, limit);
      b.assign(spec.units, 0.0);
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
    cur = net.shapes[i];
  }
  return net;
}

Network default_topology(LossKind loss, std::uint64_t seed) {
  std::vector<LayerSpec> specs = {
      LayerSpec::conv(8, 3, 1, 1),  LayerSpec::relu(),
      LayerSpec::max_pool(2, 2),    LayerSpec::conv(16, 3, 1, 1),
      LayerSpec::relu(),            LayerSpec::max_pool(2, 2),
      LayerSpec::fully_connected(32), LayerSpec::relu(),
      LayerSpec::fully_connected(loss == LossKind::Euclidean ? 1 : 2),
  };
  return make_network({1, 32, 32}, std::move(specs), loss, seed);
}

std::vector<double> forward_logits(const Network& net,
                                   std::span<const double> x,
                                   ForwardTrace* trace) {
  if (static_cast<int>(x.size()) != net.input.size())
    throw std::invalid_argument("forward: input shape mismatch");
  const auto& k = kern::ops();

  std::vector<double> cur(x.begin(), x.end());
  if (trace != nullptr) {
    trace->acts.clear();
    trace->conv_cols.assign(net.specs.size(), {});
    trace->pool_argmax.assign(net.specs.size(), {});
    trace->acts.push_back(cur);
  }

  Shape3 is = net.input;
  std::vector<double> col;
  for (std::size_t i = 0; i < net.specs.size(); ++i) {
    const auto& spec = net.specs[i];
    const Shape3& os = net.shapes[i];
    std::vector<double> out(static_cast<std::size_t>(os.size()), 0.0);

    switch (spec.kind) {
      case LayerKind::Conv: {
        const int K = conv_patch_size(is, spec);
        const int P = os.height * os.width;
        im2col(cur.data(), is, spec, os, col);
        const double* W = net.weights[i].data();
        for (int oc = 0; oc < os.channels; ++oc) {
          double bias = net.biases[i][oc];
          double* orow = out.data() + static_cast<std::size_t>(oc) * P;
          for (int p = 0; p < P; ++p)
            orow[p] = k.dot(W + static_cast<std::size_t>(oc) * K,
                            col.data() + static_cast<std::size_t>(p) * K, K) +
                      bias;
        }
        if (trace != nullptr) trace->conv_cols[i] = col;
        break;
      }
      case LayerKind::MaxPool: {
        std::vector<int> argmax(static_cast<std::size_t>(os.size()), 0);
        for (int c = 0; c < os.channels; ++c) {
          for (int oy = 0; oy < os.height; ++oy) {
            for (int ox = 0; ox < os.width; ++ox) {
              int best_idx = -1;
              double best = 0.0;
              for (int ky = 0; ky < spec.kernel; ++ky) {
                int iy = oy * spec.stride + ky;
                for (int kx = 0; kx < spec.kernel; ++kx) {
                  int ix = ox * spec.stride + kx;
                  int idx = (c * is.height + iy) * is.width + ix;
                  // strict > keeps the first maximum on ties
                  if (best_idx < 0 || cur[idx] > best) {
                    best = cur[idx];
                    best_idx = idx;
                  }
                }
              }
              int oidx = (c * os.height + oy) * os.width + ox;
              out[oidx] = best;
              argmax[oidx] = best_idx;
            }
          }
        }
        if (trace != nullptr) trace->pool_argmax[i] = std::move(argmax);
        break;
      }
      case LayerKind::FullyConnected: {
        const int in_n = is.size();
        const double* W = net.weights[i].data();
        for (int u = 0; u < spec.units; ++u)
          out[u] = k.dot(W + static_cast<std::size_t>(u) * in_n, cur.data(),
                         in_n) +
                   net.biases[i][u];
        break;
      }
      case LayerKind::Relu:
        k.relu_fwd(out.data(), cur.data(), cur.size());
        break;
    }

    cur = std::move(out);
    if (trace != nullptr) trace->acts.push_back(cur);
    is = os;
  }
  return cur;
}

double score_from_logits(const Network& net, std::span<const double> logits) {
  if (net.loss == LossKind::Euclidean) return logits[0];
  return logits[1] - logits[0];  // logit(+1) - logit(-1)
}

double forward(const Network& net, const Tensor& x) {
  return score_from_logits(net, forward_logits(net, x.values));
}

AttributeLabel classify(double score) { return score > 0.0 ? +1 : -1; }

double loss_from_logits(const Network& net, std::span<const double> logits,
                        AttributeLabel y) {
  check_label(y);
  if (net.loss == LossKind::Euclidean) {
    double d = logits[0] - static_cast<double>(y);
    return d * d;
  }
  // -log softmax(z)_y, stabilized
  double m = std::max(logits[0], logits[1]);
  double lse = std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m)) + m;
  return lse - logits[y == +1 ? 1 : 0];
}

double loss(const Network& net, const Tensor& x, AttributeLabel y) {
  return loss_from_logits(net, forward_logits(net, x.values), y);
}

double classification_error(
    const Network& net,
    const std::vector<std::pair<const Image*, AttributeLabel>>& dataset) {
  if (dataset.empty())
    throw std::invalid_argument("classification_error: empty dataset");
  std::size_t wrong = 0;
  for (const auto& [img, y] : dataset) {
    check_label(y);
    if (classify(forward(net, normalize(*img))) != y) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(dataset.size());
}

Gradients Gradients::zeros_like(const Network& net) {
  Gradients g;
  for (std::size_t i = 0; i < net.specs.size(); ++i) {
    g.weights.emplace_back(net.weights[i].size(), 0.0);
    g.biases.emplace_back(net.biases[i].size(), 0.0);
  }
  return g;
}

void Gradients::add_scaled_into(double a) {
  for (auto& w : weights)
    for (auto& v : w) v *= a;
  for (auto& b : biases)
    for (auto& v : b) v *= a;
}

bool Gradients::all_finite() const {
  for (const auto& w : weights)
    for (double v : w)
      if (!std::isfinite(v)) return false;
  for (const auto& b : biases)
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

void backward(const Network& net, const ForwardTrace& trace,
              std::span<const double> dlogits, std::vector<double>* dinput,
              Gradients* dparams) {
  const auto& k = kern::ops();
  std::vector<double> dcur(dlogits.begin(), dlogits.end());

  for (std::size_t ii = net.specs.size(); ii-- > 0;) {
    const auto& spec = net.specs[ii];
    const Shape3 is = ii == 0 ? net.input : net.shapes[ii - 1];
    const Shape3& os = net.shapes[ii];
    const std::vector<double>& in_act = trace.acts[ii];
    std::vector<double> din(static_cast<std::size_t>(is.size()), 0.0);

    switch (spec.kind) {
      case LayerKind::Conv: {
        const int K = conv_patch_size(is, spec);
        const int P = os.height * os.width;
        const std::vector<double>& col = trace.conv_cols[ii];
        std::vector<double> dcol(static_cast<std::size_t>(P) * K, 0.0);
        const double* W = net.weights[ii].data();
        for (int oc = 0; oc < os.channels; ++oc) {
          const double* drow = dcur.data() + static_cast<std::size_t>(oc) * P;
          double* dw = dparams != nullptr
                           ? dparams->weights[ii].data() +
                                 static_cast<std::size_t>(oc) * K
                           : nullptr;
          double db = 0.0;
          for (int p = 0; p < P; ++p) {
            double g = drow[p];
            if (g == 0.0) continue;
            k.axpy(dcol.data() + static_cast<std::size_t>(p) * K, g,
                   W + static_cast<std::size_t>(oc) * K, K);
            if (dw != nullptr)
              k.axpy(dw, g, col.data() + static_cast<std::size_t>(p) * K, K);
            db += g;
          }
          if (dparams != nullptr) dparams->biases[ii][oc] += db;
        }
        col2im_add(dcol, is, spec, os, din.data());
        break;
      }
      case LayerKind::MaxPool: {
        const std::vector<int>& argmax = trace.pool_argmax[ii];
        for (std::size_t o = 0; o < dcur.size(); ++o)
          din[argmax[o]] += dcur[o];
        break;
      }
      case LayerKind::FullyConnected: {
        const int in_n = is.size();
        const double* W = net.weights[ii].data();
        for (int u = 0; u < spec.units; ++u) {
          double g = dcur[u];
          if (g == 0.0) continue;
          k.axpy(din.data(), g, W + static_cast<std::size_t>(u) * in_n, in_n);
          if (dparams != nullptr) {
            k.axpy(dparams->weights[ii].data() +
                       static_cast<std::size_t>(u) * in_n,
                   g, in_act.data(), in_n);
            dparams->biases[ii][u] += g;
          }
        }
        break;
      }
      case LayerKind::Relu:
        k.relu_bwd(din.data(), dcur.data(), in_act.data(), din.size());
        break;
    }
    dcur = std::move(din);
  }
  if (dinput != nullptr) *dinput = std::move(dcur);
}

namespace {

// Gradient of the loss with respect to the decision-layer outputs.
std::vector<double> loss_seed(const Network& net,
                              const std::vector<double>& logits,
                              AttributeLabel y) {
  check_label(y);
  if (net.loss == LossKind::Euclidean)
    return {2.0 * (logits[0] - static_cast<double>(y))};
  double m = std::max(logits[0], logits[1]);
  double e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
  double z = e0 + e1;
  std::vector<double> p = {e0 / z, e1 / z};
  p[y == +1 ? 1 : 0] -= 1.0;
  return p;
}

// Gradient of the scalar decision score with respect to the logits.
std::vector<double> score_seed(const Network& net) {
  if (net.loss == LossKind::Euclidean) return {1.0};
  return {-1.0, +1.0};
}

}  // namespace

std::vector<double> grad_loss_wrt_input(const Network& net, const Tensor& x,
                                        AttributeLabel y) {
  ForwardTrace trace;
  auto logits = forward_logits(net, x.values, &trace);
  std::vector<double> dinput;
  backward(net, trace, loss_seed(net, logits, y), &dinput, nullptr);
  return dinput;
}

std::vector<double> grad_score_wrt_input(const Network& net, const Tensor& x) {
  ForwardTrace trace;
  forward_logits(net, x.values, &trace);
  std::vector<double> dinput;
  backward(net, trace, score_seed(net), &dinput, nullptr);
  return dinput;
}

Gradients grad_loss_wrt_params(
    const Network& net,
    const std::vector<std::pair<const Tensor*, AttributeLabel>>& batch) {
  if (batch.empty())
    throw std::invalid_argument("grad_loss_wrt_params: empty batch");
  Gradients acc = Gradients::zeros_like(net);
  for (const auto& [x, y] : batch) {
    ForwardTrace trace;
    auto logits = forward_logits(net, x->values, &trace);
    backward(net, trace, loss_seed(net, logits, y), nullptr, &acc);
  }
  acc.add_scaled_into(1.0 / static_cast<double>(batch.size()));
  return acc;
}

}  // namespace attriflip
