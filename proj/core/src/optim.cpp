#include "advw/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "advw/rng.hpp"

namespace advw {

AdamState AdamState::for_params(const std::vector<Param>& params, double lr) {
  AdamState s;
  s.lr = lr;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Param& p : params) {
    s.m.push_back(Tensor::zeros(p.value.shape()));
    s.v.push_back(Tensor::zeros(p.value.shape()));
  }
  return s;
}

AdamState AdamState::for_tensor(const Tensor& shape_like, double lr) {
  AdamState s;
  s.lr = lr;
  s.m.push_back(Tensor::zeros(shape_like.shape()));
  s.v.push_back(Tensor::zeros(shape_like.shape()));
  return s;
}

namespace {

void adam_update(AdamState& state, std::size_t slot, Tensor& value, const Tensor& grad,
                 const std::string& name) {
  if (!grad.same_shape(value)) {
    throw std::invalid_argument("adam_step: gradient shape " +
                                Tensor::shape_string(grad.shape()) + " does not match parameter '" +
                                name + "' " + Tensor::shape_string(value.shape()));
  }
  if (!grad.all_finite()) {
    throw std::runtime_error("adam_step: non-finite gradient for parameter '" + name + "'");
  }
  Tensor& m = state.m[slot];
  Tensor& v = state.v[slot];
  const double b1 = state.beta1, b2 = state.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    m[i] = b1 * m[i] + (1.0 - b1) * g;
    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
    const double m_hat = m[i] / corr1;
    const double v_hat = v[i] / corr2;
    value[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

}  // namespace

void adam_step(AdamState& state, std::vector<Param>& params, std::span<const Tensor> grads) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
  }
  ++state.step_count;
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_update(state, i, params[i].value, grads[i], params[i].name);
  }
}

void adam_step(AdamState& state, Tensor& value, const Tensor& grad, const char* name) {
  if (state.m.size() != 1) throw std::invalid_argument("adam_step: state is not single-tensor");
  ++state.step_count;
  adam_update(state, 0, value, grad, name);
}

double PlateauScheduler::step(double val_loss, double current_lr) {
  if (!std::isfinite(val_loss)) {
    throw std::invalid_argument("scheduler: non-finite validation loss");
  }
  if (val_loss < best - improvement_threshold) {
    best = val_loss;
    stall_count = 0;
    return current_lr;
  }
  ++stall_count;
  if (stall_count > patience) {
    stall_count = 0;
    return std::max(current_lr * factor, min_lr);
  }
  return current_lr;
}

BatchLossFn cross_entropy_loss(double temperature) {
  return [temperature](Tape& tape, NodeId logits, std::span<const int>,
                       std::span<const int> labels) {
    NodeId probs = tape.softmax_t(logits, temperature);
    return tape.cross_entropy(probs, labels, Reduction::kMean);
  };
}

namespace {

// Item-weighted mean, so a partial final batch does not skew the result.
double dataset_loss(const ModelState& model, const LabeledDataset& ds, int batch_size,
                    const BatchLossFn& loss_fn) {
  double total = 0.0;
  for (int start = 0; start < ds.size(); start += batch_size) {
    const int count = std::min(batch_size, ds.size() - start);
    std::vector<int> items(static_cast<std::size_t>(count));
    std::vector<int> labels(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      items[static_cast<std::size_t>(i)] = start + i;
      labels[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(start + i)];
    }
    Tape tape;
    TapedModel bound = bind_model(tape, model);
    NodeId logits = bound.logits(tape.leaf(ds.gather(items)));
    NodeId loss = loss_fn(tape, logits, items, labels);
    total += tape.value(loss).value() * count;
  }
  return ds.size() > 0 ? total / ds.size() : 0.0;
}

}  // namespace

TrainResult train_with_loss(const ModelState& init, const LabeledDataset& train_ds,
                            const LabeledDataset& val_ds, const TrainConfig& cfg,
                            const BatchLossFn& train_loss, const BatchLossFn& val_loss) {
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be at least 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be at least 1");
  if (train_ds.size() == 0 || val_ds.size() == 0) {
    throw std::invalid_argument("train: datasets must be nonempty");
  }

  TrainResult result;
  result.model = init;
  AdamState adam = AdamState::for_params(result.model.params, cfg.initial_lr);
  PlateauScheduler scheduler;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<int> order = shuffled_indices(train_ds.size(), mix_seed(cfg.seed, epoch));
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < train_ds.size(); start += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, train_ds.size() - start);
      std::span<const int> items(order.data() + start, static_cast<std::size_t>(count));
      std::vector<int> labels(static_cast<std::size_t>(count));
      for (int i = 0; i < count; ++i) {
        labels[static_cast<std::size_t>(i)] = train_ds.labels[static_cast<std::size_t>(items[i])];
      }

      Tape tape;
      TapedModel bound = bind_model(tape, result.model);
      NodeId logits = bound.logits(tape.leaf(train_ds.gather(items)));
      NodeId loss = train_loss(tape, logits, items, labels);
      tape.backward(loss);

      std::vector<Tensor> grads;
      grads.reserve(bound.params.size());
      for (NodeId p : bound.params) grads.push_back(tape.grad(p));
      try {
        adam_step(adam, result.model.params, grads);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("train: epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batches) + ": " + e.what());
      }
      epoch_loss += tape.value(loss).value();
      ++batches;
    }

    result.history.train_loss.push_back(batches > 0 ? epoch_loss / batches : 0.0);
    result.history.learning_rate.push_back(adam.lr);
    const double vloss = dataset_loss(result.model, val_ds, cfg.batch_size, val_loss);
    result.history.val_loss.push_back(vloss);
    adam.lr = scheduler.step(vloss, adam.lr);
  }
  return result;
}

TrainResult train(const ModelState& init, const LabeledDataset& train_ds,
                  const LabeledDataset& val_ds, const TrainConfig& cfg) {
  const BatchLossFn loss = cross_entropy_loss(cfg.temperature);
  return train_with_loss(init, train_ds, val_ds, cfg, loss, loss);
}

}  // namespace advw
