#include "attriflip/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "attriflip/kernels.hpp"

namespace attriflip {

const char* direction_kind_name(DirectionKind k) {
  return k == DirectionKind::FGS ? "fgs" : "ffa";
}

DirectionKind direction_kind_from_name(const std::string& name) {
  if (name == "fgs") return DirectionKind::FGS;
  if (name == "ffa") return DirectionKind::FFA;
  throw std::runtime_error("unknown direction kind: " + name);
}

const char* failure_code_name(FailureCode f) {
  switch (f) {
    case FailureCode::None: return "none";
    case FailureCode::UnusableDirection: return "unusable_direction";
    case FailureCode::NoFlipInBudget: return "no_flip_in_budget";
    case FailureCode::QuantizeUnflipped: return "quantize_unflipped";
    case FailureCode::PassBelowThreshold: return "pass_below_threshold";
  }
  return "?";
}

FailureCode failure_code_from_name(const std::string& name) {
  for (FailureCode f :
       {FailureCode::None, FailureCode::UnusableDirection,
        FailureCode::NoFlipInBudget, FailureCode::QuantizeUnflipped,
        FailureCode::PassBelowThreshold})
    if (name == failure_code_name(f)) return f;
  throw std::runtime_error("unknown failure code: " + name);
}

namespace {

bool direction_usable(const std::vector<double>& values) {
  bool any_nonzero = false;
  for (double v : values) {
    if (!std::isfinite(v)) return false;
    if (v != 0.0) any_nonzero = true;
  }
  return any_nonzero;
}

}  // namespace

Direction fgs_direction(const Network& net, const Tensor& x,
                        AttributeLabel y) {
  std::vector<double> g = grad_loss_wrt_input(net, x, y);
  Direction d;
  d.kind = DirectionKind::FGS;
  d.values.resize(g.size());
  kern::ops().sign(d.values.data(), g.data(), g.size());
  d.usable = direction_usable(d.values);
  return d;
}

Direction ffa_direction(const Network& net, const Tensor& x) {
  std::vector<double> g = grad_score_wrt_input(net, x);
  Direction d;
  d.kind = DirectionKind::FFA;
  d.values.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) d.values[i] = -g[i];
  d.usable = direction_usable(d.values);
  return d;
}

namespace {

AttributeLabel classify_at(const Network& net, const Tensor& x,
                           const std::vector<double>& dir, double w,
                           std::vector<double>& scratch) {
  scratch.resize(x.values.size());
  kern::ops().add_scaled(scratch.data(), x.values.data(), w, dir.data(),
                         scratch.size());
  return classify(score_from_logits(net, forward_logits(net, scratch)));
}

}  // namespace

Bracket line_search_flip(const Network& net, const Tensor& x,
                         const std::vector<double>& direction,
                         const SearchConfig& cfg) {
  if (!(cfg.initial_step > 0.0))
    throw std::invalid_argument("line search: initial_step must be positive");
  const AttributeLabel original = classify(forward(net, x));
  std::vector<double> scratch;

  Bracket bracket;
  double prev = 0.0;
  double w = cfg.initial_step;
  for (int step = 0; step <= cfg.max_doublings; ++step, w *= 2.0) {
    if (classify_at(net, x, direction, w, scratch) != original) {
      bracket.low = prev;
      bracket.high = w;
      bracket.found = true;
      return bracket;
    }
    prev = w;
  }
  return bracket;  // exhausted the budget without a flip
}

double binary_search_refine(const Network& net, const Tensor& x,
                            const std::vector<double>& direction,
                            const Bracket& bracket, const SearchConfig& cfg) {
  const AttributeLabel original = classify(forward(net, x));
  std::vector<double> scratch;
  if (!bracket.found)
    throw std::invalid_argument("binary search: bracket not found");
  if (bracket.low > 0.0 &&
      classify_at(net, x, direction, bracket.low, scratch) != original)
    throw std::invalid_argument("binary search: lower endpoint already flips");
  if (classify_at(net, x, direction, bracket.high, scratch) == original)
    throw std::invalid_argument("binary search: upper endpoint does not flip");

  double lo = bracket.low, hi = bracket.high;
  for (int i = 0; i < cfg.binary_search_iterations; ++i) {
    double mid = 0.5 * (lo + hi);
    if (classify_at(net, x, direction, mid, scratch) != original)
      hi = mid;
    else
      lo = mid;
  }
  return hi;  // smallest tested weight that flips
}

Image quantize(const Tensor& normalized) {
  Image img(normalized.height, normalized.width, normalized.channels);
  for (int c = 0; c < normalized.channels; ++c)
    for (int y = 0; y < normalized.height; ++y)
      for (int x = 0; x < normalized.width; ++x) {
        double v = (normalized.at(c, y, x) + 0.5) * 255.0;
        // round half away from zero, then clamp to the pixel range
        double r = v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5);
        img.at(y, x, c) = static_cast<std::uint8_t>(
            std::clamp(r, 0.0, 255.0));
      }
  return img;
}

namespace {

AttackOutcome run_attack(const Network& net, const Image& image,
                         AttributeLabel ground_truth, DirectionKind kind,
                         const SearchConfig& cfg, bool expect_correct) {
  if (ground_truth != -1 && ground_truth != 1)
    throw std::invalid_argument("label must be -1 or +1");

  const Tensor x = normalize(image);
  const AttributeLabel before = classify(forward(net, x));
  if (expect_correct && before != ground_truth)
    throw std::invalid_argument(
        "generate_adversarial requires a correctly classified input; use "
        "detect_natural_adversarial for misclassified ones");
  if (!expect_correct && before == ground_truth)
    throw std::invalid_argument(
        "detect_natural_adversarial requires a misclassified input");

  AttackOutcome out;
  out.kind = kind;
  out.plus_case = expect_correct;
  out.class_before = before;
  out.class_after = before;

  // Direction that escapes the current classification. FGS ascends the loss
  // with respect to the current class; FFA inverts the current decision
  // score, so against a negative score the stored direction is negated.
  Direction dir = kind == DirectionKind::FGS ? fgs_direction(net, x, before)
                                             : ffa_direction(net, x);
  if (!dir.usable) {
    out.failure = FailureCode::UnusableDirection;
    return out;
  }
  std::vector<double> step_dir = dir.values;
  if (kind == DirectionKind::FFA && before == -1)
    for (auto& v : step_dir) v = -v;

  Bracket bracket = line_search_flip(net, x, step_dir, cfg);
  if (!bracket.found) {
    out.failure = FailureCode::NoFlipInBudget;
    return out;
  }
  double w = binary_search_refine(net, x, step_dir, bracket, cfg);

  // Rounding to pixel values can undo a marginal flip; retry with larger
  // weights, resuming upward from the refined one.
  const auto& k = kern::ops();
  std::vector<double> perturbed(x.values.size());
  bool flipped = false;
  double used_w = w;
  Image quantized;
  AttributeLabel after = before;
  for (int attempt = 0; attempt <= cfg.quantize_retries; ++attempt) {
    double cand = attempt == 0
                      ? w
                      : (attempt == 1 ? 0.5 * (w + bracket.high)
                                      : bracket.high *
                                            std::pow(2.0, attempt - 2));
    Tensor t(x.channels, x.height, x.width);
    k.add_scaled(t.values.data(), x.values.data(), cand, step_dir.data(),
                 t.values.size());
    Image q = quantize(t);
    AttributeLabel c = classify(forward(net, normalize(q)));
    if (c != before) {
      flipped = true;
      used_w = cand;
      quantized = std::move(q);
      after = c;
      break;
    }
  }
  if (!flipped) {
    out.failure = FailureCode::QuantizeUnflipped;
    out.flip_weight = w;
    return out;
  }

  out.flip_weight = used_w;
  out.perturbed = std::move(quantized);
  out.class_after = after;
  out.pass = pass_score(out.perturbed, image, cfg.pass_threshold);
  if (out.pass.adversarial_ok) {
    out.success = true;
    out.failure = FailureCode::None;
  } else {
    out.failure = FailureCode::PassBelowThreshold;
  }
  return out;
}

}  // namespace

AttackOutcome generate_adversarial(const Network& net, const Image& x,
                                   AttributeLabel y, DirectionKind kind,
                                   const SearchConfig& cfg) {
  return run_attack(net, x, y, kind, cfg, /*expect_correct=*/true);
}

AttackOutcome detect_natural_adversarial(const Network& net, const Image& x,
                                         AttributeLabel y, DirectionKind kind,
                                         const SearchConfig& cfg) {
  return run_attack(net, x, y, kind, cfg, /*expect_correct=*/false);
}

Image magnified_delta(const Image& original, const Image& perturbed,
                      double factor) {
  if (!original.same_shape(perturbed))
    throw std::invalid_argument("magnified_delta: shape mismatch");
  Image out(original.height, original.width, original.channels);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    double delta = static_cast<double>(perturbed.pixels[i]) -
                   static_cast<double>(original.pixels[i]);
    double v = 128.0 + factor * delta;
    out.pixels[i] =
        static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return out;
}

}  // namespace attriflip
