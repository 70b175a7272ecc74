#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "advw/data.hpp"
#include "advw/model.hpp"

namespace advw {

// Adam with bias correction. The beta defaults follow the training setup
// used throughout: exponential moving means with (0.9, 0.99).
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  long long step_count = 0;
  std::vector<Tensor> m, v;

  static AdamState for_params(const std::vector<Param>& params, double lr);
  static AdamState for_tensor(const Tensor& shape_like, double lr);
};

// One Adam step over a named parameter list. Throws (naming the parameter)
// if any gradient element is non-finite.
void adam_step(AdamState& state, std::vector<Param>& params, std::span<const Tensor> grads);

// Single-tensor variant used by the perturbation optimizer.
void adam_step(AdamState& state, Tensor& value, const Tensor& grad, const char* name = "tensor");

// Reduce-on-plateau in minimum mode: after more than `patience` consecutive
// non-improving observations the rate is multiplied by `factor`, floored at
// min_lr. Improvement means strictly lower by more than 1e-8.
struct PlateauScheduler {
  double factor = 0.1;
  int patience = 3;
  double min_lr = 1e-4;
  double improvement_threshold = 1e-8;
  double best = std::numeric_limits<double>::infinity();
  int stall_count = 0;

  double step(double val_loss, double current_lr);
};

struct TrainConfig {
  int epochs = 10;
  int batch_size = 64;
  double initial_lr = 1e-3;
  double temperature = 1.0;  // loss temperature; stored weights never depend on it
  std::uint64_t seed = 0;
};

struct TrainHistory {
  std::vector<double> train_loss;   // mean batch loss per epoch
  std::vector<double> val_loss;     // mean validation loss per epoch
  std::vector<double> learning_rate;  // rate in effect during each epoch
};

struct TrainResult {
  ModelState model;
  TrainHistory history;
};

// Builds the scalar loss for one batch. `items` are the dataset indices in
// the batch (for per-item auxiliary targets), `labels` the gathered labels.
using BatchLossFn = std::function<NodeId(Tape&, NodeId logits, std::span<const int> items,
                                         std::span<const int> labels)>;

// Epochs x batches of adam_step on the mean batch loss; one scheduler step
// per epoch on the mean validation loss. Batch order is reshuffled each
// epoch from the module PRNG seeded with mix_seed(cfg.seed, epoch).
TrainResult train_with_loss(const ModelState& init, const LabeledDataset& train_ds,
                            const LabeledDataset& val_ds, const TrainConfig& cfg,
                            const BatchLossFn& train_loss, const BatchLossFn& val_loss);

// Plain training: categorical cross-entropy through softmax at cfg.temperature.
TrainResult train(const ModelState& init, const LabeledDataset& train_ds,
                  const LabeledDataset& val_ds, const TrainConfig& cfg);

// The loss used by train(): cross_entropy(softmax_T(logits), labels), mean reduced.
BatchLossFn cross_entropy_loss(double temperature);

}  // namespace advw
