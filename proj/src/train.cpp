#include "attriflip/train.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "attriflip/kernels.hpp"
#include "attriflip/rng.hpp"

namespace attriflip {

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size >= 1");
  if (!(cfg.base_learning_rate > 0.0))
    throw std::invalid_argument("base_learning_rate > 0");
  if (!(cfg.rms_decay > 0.0 && cfg.rms_decay < 1.0))
    throw std::invalid_argument("rms_decay in (0,1)");
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("epsilon > 0");
  if (cfg.max_epochs < 1) throw std::invalid_argument("max_epochs >= 1");
  if (cfg.patience < 1) throw std::invalid_argument("patience >= 1");
}

double inverse_decay_lr(const TrainConfig& cfg, long iteration) {
  return cfg.base_learning_rate *
         std::pow(1.0 + cfg.inv_decay_gamma * static_cast<double>(iteration),
                  -cfg.inv_decay_power);
}

TrainState make_train_state(const Network& net) {
  TrainState s;
  s.rms_cache = Gradients::zeros_like(net);
  return s;
}

void rmsprop_step(TrainState& state, Network& net,
                  const std::vector<std::pair<const Tensor*, AttributeLabel>>& batch,
                  const TrainConfig& cfg) {
  Gradients g = grad_loss_wrt_params(net, batch);
  if (!g.all_finite())
    throw std::runtime_error(
        "training aborted: non-finite gradient at iteration " +
        std::to_string(state.iteration));
  const double lr = inverse_decay_lr(cfg, state.iteration);
  const auto& k = kern::ops();
  for (std::size_t i = 0; i < net.specs.size(); ++i) {
    if (!net.weights[i].empty())
      k.rmsprop_update(net.weights[i].data(), state.rms_cache.weights[i].data(),
                       g.weights[i].data(), net.weights[i].size(),
                       cfg.rms_decay, lr, cfg.epsilon);
    if (!net.biases[i].empty())
      k.rmsprop_update(net.biases[i].data(), state.rms_cache.biases[i].data(),
                       g.biases[i].data(), net.biases[i].size(), cfg.rms_decay,
                       lr, cfg.epsilon);
  }
  ++state.iteration;
}

namespace {

double split_error(const Network& net, const std::vector<Tensor>& inputs,
                   const std::vector<AttributeLabel>& labels,
                   const std::vector<int>& indices) {
  std::size_t wrong = 0;
  for (int i : indices)
    if (classify(forward(net, inputs[i])) != labels[i]) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(indices.size());
}

}  // namespace

TrainResult train_attribute(const Corpus& corpus, int attribute_index,
                            LossKind loss, const TrainConfig& cfg) {
  validate(cfg);
  if (attribute_index < 0 ||
      attribute_index >= static_cast<int>(corpus.attribute_names.size()))
    throw std::invalid_argument("attribute index out of range");

  std::vector<int> train_idx = corpus.split_indices(Split::Train);
  std::vector<int> val_idx = corpus.split_indices(Split::Validation);
  if (train_idx.empty() || val_idx.empty())
    throw std::invalid_argument("corpus lacks train or validation split");

  // Cached normalized inputs and labels, indexed like corpus.items.
  std::vector<Tensor> inputs;
  std::vector<AttributeLabel> labels;
  inputs.reserve(corpus.items.size());
  for (const auto& item : corpus.items) {
    inputs.push_back(normalize(item.image));
    labels.push_back(item.labels[attribute_index]);
  }

  int plus = 0, minus = 0;
  for (int i : train_idx) (labels[i] > 0 ? plus : minus)++;
  if (plus == 0 || minus == 0)
    throw std::invalid_argument(
        "degenerate corpus: train split has a single class for attribute " +
        corpus.attribute_names[attribute_index]);

  Network net = default_topology(loss, cfg.seed);
  if (Shape3{corpus.channels, corpus.height, corpus.width} != net.input)
    net = make_network({corpus.channels, corpus.height, corpus.width},
                       net.specs, loss, cfg.seed);

  TrainState state = make_train_state(net);
  Rng shuffle_rng(mix_seed(cfg.seed, 0x5eedULL));

  TrainResult result;
  result.best_validation_error = 2.0;  // above any reachable error
  int stale_epochs = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_deterministic(train_idx, shuffle_rng);
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<std::pair<const Tensor*, AttributeLabel>> batch;
      std::size_t end = std::min(train_idx.size(),
                                 start + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t j = start; j < end; ++j)
        batch.emplace_back(&inputs[train_idx[j]], labels[train_idx[j]]);
      rmsprop_step(state, net, batch, cfg);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_error = split_error(net, inputs, labels, train_idx);
    stats.validation_error = split_error(net, inputs, labels, val_idx);
    stats.learning_rate = inverse_decay_lr(cfg, state.iteration - 1);
    result.history.push_back(stats);

    if (epoch == 2) result.two_epochs = net;

    if (stats.validation_error < result.best_validation_error) {
      result.best_validation_error = stats.validation_error;
      result.best_epoch = epoch;
      result.converged = net;
      stale_epochs = 0;
    } else {
      ++stale_epochs;
    }
    if (stale_epochs >= cfg.patience) break;
  }

  // Runs shorter than two epochs fall back to the final state.
  if (result.two_epochs.specs.empty()) result.two_epochs = net;
  return result;
}

AttributeLabel trivial_baseline(std::span<const AttributeLabel> labels) {
  if (labels.empty())
    throw std::invalid_argument("trivial_baseline: empty label set");
  long plus = 0, minus = 0;
  for (AttributeLabel l : labels) (l > 0 ? plus : minus)++;
  return plus >= minus ? +1 : -1;
}

void write_history_csv(const std::vector<EpochStats>& history,
                       const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write history: " + path);
  os << "epoch,train_error,validation_error,learning_rate\n";
  char buf[128];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", h.epoch,
                  h.train_error, h.validation_error, h.learning_rate);
    os << buf;
  }
}

}  // namespace attriflip
