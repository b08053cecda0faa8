#pragma once

#include <string>
#include <vector>

#include "attriflip/image.hpp"
#include "attriflip/nn.hpp"
#include "attriflip/pass.hpp"

namespace attriflip {

enum class DirectionKind { FGS, FFA };

const char* direction_kind_name(DirectionKind k);
DirectionKind direction_kind_from_name(const std::string& name);

// A perturbation direction in normalized input space. Unusable when the
// underlying gradient vanished (or was non-finite).
struct Direction {
  DirectionKind kind;
  std::vector<double> values;
  bool usable = false;
};

struct SearchConfig {
  double initial_step = 1e-3;      // normalized units
  int max_doublings = 24;
  int binary_search_iterations = 20;
  double pass_threshold = 0.95;    // tau
  int quantize_retries = 4;
};

enum class FailureCode {
  None,
  UnusableDirection,
  NoFlipInBudget,
  QuantizeUnflipped,
  PassBelowThreshold,
};

const char* failure_code_name(FailureCode f);
FailureCode failure_code_from_name(const std::string& name);

struct AttackOutcome {
  DirectionKind kind = DirectionKind::FGS;
  bool plus_case = true;   // source was correctly classified
  bool success = false;
  FailureCode failure = FailureCode::None;
  double flip_weight = 0.0;
  Image perturbed;         // quantized; valid only when a flip was found
  PassScore pass;
  AttributeLabel class_before = -1;
  AttributeLabel class_after = -1;
};

// Sign of the loss gradient with respect to the input; sign(0) = 0. The
// label is the class the perturbation should escape from.
Direction fgs_direction(const Network& net, const Tensor& x, AttributeLabel y);

// Negative gradient of the decision score; label-free.
Direction ffa_direction(const Network& net, const Tensor& x);

struct Bracket {
  double low = 0.0;   // last non-flipping weight (0 when the first step flips)
  double high = 0.0;  // first flipping weight
  bool found = false;
};

// Doubling line search for the first weight along `direction` at which the
// classification of x + w*direction differs from classify(forward(x)).
Bracket line_search_flip(const Network& net, const Tensor& x,
                         const std::vector<double>& direction,
                         const SearchConfig& cfg);

// Halves the bracket binary_search_iterations times and returns the smallest
// tested weight that still flips. The lower endpoint never flips and the
// upper endpoint always flips throughout.
double binary_search_refine(const Network& net, const Tensor& x,
                            const std::vector<double>& direction,
                            const Bracket& bracket, const SearchConfig& cfg);

// Back to 8-bit pixels: denormalize, round half away from zero, clamp.
Image quantize(const Tensor& normalized);

// Full attack on a correctly classified image (the "+" case): direction,
// line search, binary refinement, quantization (with upward retries when
// rounding undoes the flip) and the PASS check.
AttackOutcome generate_adversarial(const Network& net, const Image& x,
                                   AttributeLabel y, DirectionKind kind,
                                   const SearchConfig& cfg);

// Same machinery for a misclassified image (the "-" case); the flip restores
// the ground-truth label.
AttackOutcome detect_natural_adversarial(const Network& net, const Image& x,
                                         AttributeLabel y, DirectionKind kind,
                                         const SearchConfig& cfg);

// Perturbation rendering for inspection: pixel deltas scaled and centered at
// gray (128), per-channel.
Image magnified_delta(const Image& original, const Image& perturbed,
                      double factor = 50.0);

}  // namespace attriflip
