#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attriflip/datagen.hpp"
#include "attriflip/nn.hpp"

namespace attriflip {

struct TrainConfig {
  int batch_size = 32;
  double base_learning_rate = 1e-3;
  double rms_decay = 0.98;       // rho
  double epsilon = 1e-8;
  double inv_decay_gamma = 1e-4; // lr_t = base * (1 + gamma*t)^(-power)
  double inv_decay_power = 0.75;
  int max_epochs = 30;
  int patience = 3;  // epochs without validation improvement before stopping
  std::uint64_t seed = 1;
};

void validate(const TrainConfig& cfg);

double inverse_decay_lr(const TrainConfig& cfg, long iteration);

struct TrainState {
  long iteration = 0;
  Gradients rms_cache;  // running mean of squared gradients, shaped like theta
};

TrainState make_train_state(const Network& net);

// One RMSProp update from the mean gradient over the batch. Aborts with a
// diagnostic if the gradient is not finite.
void rmsprop_step(TrainState& state, Network& net,
                  const std::vector<std::pair<const Tensor*, AttributeLabel>>& batch,
                  const TrainConfig& cfg);

struct EpochStats {
  int epoch;
  double train_error;
  double validation_error;
  double learning_rate;
};

struct TrainResult {
  Network two_epochs;  // snapshot after the second epoch
  Network converged;   // best validation error seen
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_validation_error = 1.0;
};

// Trains one attribute network on the corpus train split, early-stopping on
// the validation split. Deterministic in cfg.seed. Refuses a train split
// that contains a single class.
TrainResult train_attribute(const Corpus& corpus, int attribute_index,
                            LossKind loss, const TrainConfig& cfg);

// Majority label of the training set; ties break to +1.
AttributeLabel trivial_baseline(std::span<const AttributeLabel> labels);

// CSV: epoch,train_error,validation_error,learning_rate
void write_history_csv(const std::vector<EpochStats>& history,
                       const std::string& path);

}  // namespace attriflip
