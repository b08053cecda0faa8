#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attriflip/image.hpp"

namespace attriflip {

enum class LayerKind { Conv, MaxPool, FullyConnected, Relu };

struct LayerSpec {
  LayerKind kind;
  int out_channels = 0;  // Conv
  int kernel = 0;        // Conv, MaxPool
  int stride = 1;        // Conv, MaxPool
  int pad = 0;           // Conv
  int units = 0;         // FullyConnected

  static LayerSpec conv(int out_channels, int kernel, int stride = 1,
                        int pad = 0) {
    return {LayerKind::Conv, out_channels, kernel, stride, pad, 0};
  }
  static LayerSpec max_pool(int kernel, int stride) {
    return {LayerKind::MaxPool, 0, kernel, stride, 0, 0};
  }
  static LayerSpec fully_connected(int units) {
    return {LayerKind::FullyConnected, 0, 0, 1, 0, units};
  }
  static LayerSpec relu() { return {LayerKind::Relu, 0, 0, 1, 0, 0}; }
};

struct Shape3 {
  int channels = 0, height = 0, width = 0;
  int size() const { return channels * height * width; }
  bool operator==(const Shape3&) const = default;
};

enum class LossKind { Euclidean, Softmax };

// Binary attribute label; +1 presence, -1 absence.
using AttributeLabel = int;

// Frozen layer stack with parameters. Forward and gradient evaluation never
// mutate a Network, so a trained instance may be shared across threads.
struct Network {
  Shape3 input;
  std::vector<LayerSpec> specs;
  std::vector<Shape3> shapes;  // output shape per layer
  std::vector<std::vector<double>> weights;  // empty for non-parameter layers
  std::vector<std::vector<double>> biases;
  LossKind loss = LossKind::Euclidean;

  // 1 scalar output for Euclidean, 2 logits for softmax.
  int outputs() const { return loss == LossKind::Euclidean ? 1 : 2; }
  std::size_t parameter_count() const;
};

// Validates the layer stack, computes per-layer shapes and randomly
// initializes parameters (uniform, fan-scaled, deterministic in seed).
Network make_network(Shape3 input, std::vector<LayerSpec> specs, LossKind loss,
                     std::uint64_t seed);

// The default desk-scale stack: 32x32x1 input, conv3x3x8 + relu,
// pool2x2, conv3x3x16 + relu, pool2x2, fc32 + relu, fc to the decision
// layer (1 unit Euclidean, 2 units softmax).
Network default_topology(LossKind loss, std::uint64_t seed);

// Per-layer activations retained for backpropagation.
struct ForwardTrace {
  std::vector<std::vector<double>> acts;      // acts[0] = input copy
  std::vector<std::vector<double>> conv_cols; // im2col buffer per layer
  std::vector<std::vector<int>> pool_argmax;  // flat input index per output
};

// Raw decision-layer output (size outputs()).
std::vector<double> forward_logits(const Network& net,
                                   std::span<const double> x,
                                   ForwardTrace* trace = nullptr);

// Scalar decision score f(x). Euclidean nets emit it directly; softmax nets
// expose logit(+1) - logit(-1) so thresholding applies uniformly.
double score_from_logits(const Network& net, std::span<const double> logits);
double forward(const Network& net, const Tensor& x);

// Thresholds the score at 0; exactly 0 classifies as -1.
AttributeLabel classify(double score);

double loss_from_logits(const Network& net, std::span<const double> logits,
                        AttributeLabel y);
double loss(const Network& net, const Tensor& x, AttributeLabel y);

// Mean misclassification rate over a labeled dataset; rejects empty input.
double classification_error(
    const Network& net,
    const std::vector<std::pair<const Image*, AttributeLabel>>& dataset);

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static Gradients zeros_like(const Network& net);
  void add_scaled_into(double a);  // scale all entries by a
  bool all_finite() const;
};

// Backpropagates the given decision-layer gradient. Either output pointer
// may be null; parameter gradients accumulate into *dparams.
void backward(const Network& net, const ForwardTrace& trace,
              std::span<const double> dlogits, std::vector<double>* dinput,
              Gradients* dparams);

// dJ/dx, the exact loss gradient with respect to every input value.
std::vector<double> grad_loss_wrt_input(const Network& net, const Tensor& x,
                                        AttributeLabel y);

// df/dx of the scalar decision score; no label involved.
std::vector<double> grad_score_wrt_input(const Network& net, const Tensor& x);

// Mean loss gradient with respect to parameters over a batch.
Gradients grad_loss_wrt_params(
    const Network& net,
    const std::vector<std::pair<const Tensor*, AttributeLabel>>& batch);

}  // namespace attriflip
