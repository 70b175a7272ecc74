#include "advw/attack.hpp"

#include <cmath>
#include <stdexcept>

#include "advw/ops.hpp"
#include "advw/optim.hpp"

namespace advw {

double AttackResult::success_rate() const {
  if (success.empty()) return 0.0;
  double hits = 0.0;
  for (bool s : success) hits += s ? 1.0 : 0.0;
  return hits / static_cast<double>(success.size());
}

double AttackResult::mean_l2() const {
  if (l2.empty()) return 0.0;
  double total = 0.0;
  for (double v : l2) total += v;
  return total / static_cast<double>(l2.size());
}

namespace {

void check_batch(const Tensor& batch, std::span<const int> labels, const ModelState& model) {
  if (batch.rank() != static_cast<int>(model.spec.input_shape.size()) + 1) {
    throw std::invalid_argument("attack: batch shape " + Tensor::shape_string(batch.shape()) +
                                " does not match model input " +
                                Tensor::shape_string(model.spec.input_shape));
  }
  if (static_cast<int>(labels.size()) != batch.dim(0)) {
    throw std::invalid_argument("attack: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(batch.dim(0)) + " items");
  }
  for (int label : labels) {
    if (label < 0 || label >= model.spec.class_count) {
      throw std::invalid_argument("attack: label " + std::to_string(label) + " out of range");
    }
  }
  for (double v : batch.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("attack: input pixel " + std::to_string(v) + " outside [0, 1]");
    }
  }
}

void fill_delta_norms(AttackResult& result, const Tensor& batch) {
  const int n = batch.dim(0);
  const std::size_t item = batch.size() / static_cast<std::size_t>(n);
  result.l2.assign(static_cast<std::size_t>(n), 0.0);
  result.linf.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double sq = 0.0, mx = 0.0;
    for (std::size_t p = 0; p < item; ++p) {
      const double d = result.adversarial[static_cast<std::size_t>(i) * item + p] -
                       batch[static_cast<std::size_t>(i) * item + p];
      sq += d * d;
      mx = std::max(mx, std::abs(d));
    }
    result.l2[static_cast<std::size_t>(i)] = std::sqrt(sq);
    result.linf[static_cast<std::size_t>(i)] = mx;
  }
}

bool is_success(int predicted, int label, const std::optional<int>& target) {
  return target.has_value() ? predicted == *target : predicted != label;
}

void fill_success(AttackResult& result, const ModelState& model, std::span<const int> labels,
                  const std::optional<int>& target) {
  const Tensor logits = forward_logits(model, result.adversarial);
  const int n = logits.dim(0), classes = logits.dim(1);
  result.success.assign(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    const int pred = argmax(logits.data().subspan(static_cast<std::size_t>(i) * classes,
                                                  static_cast<std::size_t>(classes)));
    result.success[static_cast<std::size_t>(i)] =
        is_success(pred, labels[static_cast<std::size_t>(i)], target);
  }
}

}  // namespace

AttackResult fgsm_attack(const ModelState& model, const Tensor& batch, std::span<const int> labels,
                         const FgsmConfig& cfg) {
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) {
    throw std::invalid_argument("fgsm: epsilon must be in [0, 1], got " +
                                std::to_string(cfg.epsilon));
  }
  check_batch(batch, labels, model);

  const Tensor grad = input_gradient_batch(model, batch, labels, cfg.temperature);
  AttackResult result;
  result.adversarial = batch;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    result.adversarial[i] = clamp01(batch[i] + cfg.epsilon * sign(grad[i]));
  }
  result.iterations_used.assign(static_cast<std::size_t>(batch.dim(0)), 1);
  fill_delta_norms(result, batch);
  fill_success(result, model, labels, std::nullopt);
  return result;
}

namespace {

struct CwIterate {
  double objective = 0.0;
  double margin = 0.0;
  int predicted = 0;
  Tensor grad_delta;  // filled only when requested
};

// Objective and (optionally) its gradient with respect to delta at x + delta.
CwIterate cw_evaluate(const ModelState& model, const Tensor& x, const Tensor& delta, int label,
                      const CwConfig& cfg, bool want_grad) {
  Tape tape;
  TapedModel bound = bind_model(tape, model);
  NodeId x_node = tape.leaf(x);
  NodeId delta_node = tape.leaf(delta);
  NodeId perturbed = tape.add(x_node, delta_node);

  std::vector<int> batch_shape = x.shape();
  batch_shape.insert(batch_shape.begin(), 1);
  NodeId logits = bound.logits(tape.reshape(perturbed, batch_shape));

  const Tensor& z = tape.value(logits);
  CwIterate it;
  it.predicted = argmax(z.data());

  int pos, neg;  // margin = Z_pos - Z_neg
  if (cfg.target.has_value()) {
    pos = argmax_excluding(z.data(), *cfg.target);
    neg = *cfg.target;
  } else {
    pos = label;
    neg = argmax_excluding(z.data(), label);
  }

  // f = max(margin, -kappa) = relu(margin + kappa) - kappa
  NodeId margin = tape.sub(tape.pick(logits, pos), tape.pick(logits, neg));
  NodeId f = tape.add_scalar(tape.relu(tape.add_scalar(margin, cfg.kappa)), -cfg.kappa);
  NodeId objective = tape.add(tape.sum(tape.mul(delta_node, delta_node)), tape.scale(f, cfg.c));

  it.margin = tape.value(margin).value();
  it.objective = tape.value(objective).value();
  if (want_grad) {
    tape.backward(objective);
    it.grad_delta = tape.grad(delta_node);
  }
  return it;
}

}  // namespace

AttackResult cw_attack(const ModelState& model, const Tensor& batch, std::span<const int> labels,
                       const CwConfig& cfg) {
  if (cfg.c <= 0.0) throw std::invalid_argument("cw: c must be positive");
  if (cfg.kappa < 0.0) throw std::invalid_argument("cw: kappa must be nonnegative");
  if (cfg.max_iterations < 1) throw std::invalid_argument("cw: max_iterations must be at least 1");
  if (cfg.step_size <= 0.0) throw std::invalid_argument("cw: step size must be positive");
  if (cfg.epsilon_cap && !(*cfg.epsilon_cap >= 0.0 && *cfg.epsilon_cap <= 1.0)) {
    throw std::invalid_argument("cw: epsilon cap must be in [0, 1]");
  }
  check_batch(batch, labels, model);

  const int n = batch.dim(0);
  const std::size_t item = batch.size() / static_cast<std::size_t>(n);

  AttackResult result;
  result.adversarial = batch;
  result.iterations_used.assign(static_cast<std::size_t>(n), 0);

  // Per-item optimizations are independent; the loop runs them sequentially
  // so results match any parallel schedule.
  for (int i = 0; i < n; ++i) {
    std::vector<double> x_data(item);
    for (std::size_t p = 0; p < item; ++p) x_data[p] = batch[static_cast<std::size_t>(i) * item + p];
    std::vector<int> item_shape(batch.shape().begin() + 1, batch.shape().end());
    const Tensor x(item_shape, std::move(x_data));
    const int label = labels[static_cast<std::size_t>(i)];

    Tensor delta = Tensor::zeros(item_shape);
    AdamState adam = AdamState::for_tensor(delta, cfg.step_size);

    bool found = false;
    double best_objective = 0.0;
    Tensor best_delta = delta;
    int steps = 0;

    for (int iter = 0; iter <= cfg.max_iterations; ++iter) {
      const bool last = iter == cfg.max_iterations;
      CwIterate it = cw_evaluate(model, x, delta, label, cfg, /*want_grad=*/!last);
      if (is_success(it.predicted, label, cfg.target) &&
          (!found || it.objective < best_objective)) {
        found = true;
        best_objective = it.objective;
        best_delta = delta;
      }
      if (last) break;
      adam_step(adam, delta, it.grad_delta, "delta");
      ++steps;
      // projection of x + delta onto [0, 1]^n
      for (std::size_t p = 0; p < item; ++p) delta[p] = clamp01(x[p] + delta[p]) - x[p];
    }

    const Tensor& chosen = found ? best_delta : delta;
    for (std::size_t p = 0; p < item; ++p) {
      result.adversarial[static_cast<std::size_t>(i) * item + p] = clamp01(x[p] + chosen[p]);
    }
    result.iterations_used[static_cast<std::size_t>(i)] = steps;
  }

  fill_delta_norms(result, batch);
  fill_success(result, model, labels, cfg.target);

  if (cfg.epsilon_cap.has_value()) {
    return apply_epsilon_cap(model, batch, labels, result, *cfg.epsilon_cap, cfg.target);
  }
  return result;
}

AttackResult apply_epsilon_cap(const ModelState& model, const Tensor& batch,
                               std::span<const int> labels, const AttackResult& uncapped,
                               double cap, const std::optional<int>& target) {
  if (!(cap >= 0.0 && cap <= 1.0)) {
    throw std::invalid_argument("epsilon cap must be in [0, 1], got " + std::to_string(cap));
  }
  AttackResult result = uncapped;
  for (std::size_t p = 0; p < batch.size(); ++p) {
    double d = uncapped.adversarial[p] - batch[p];
    d = std::max(-cap, std::min(cap, d));
    result.adversarial[p] = clamp01(batch[p] + d);
  }
  fill_delta_norms(result, batch);
  fill_success(result, model, labels, target);
  return result;
}

namespace {

void check_epsilons(std::span<const double> epsilons) {
  if (epsilons.empty()) throw std::invalid_argument("epsilon_sweep: epsilon list is empty");
  for (double e : epsilons) {
    if (!(e >= 0.0 && e <= 1.0)) {
      throw std::invalid_argument("epsilon_sweep: epsilon " + std::to_string(e) +
                                  " outside [0, 1]");
    }
  }
}

SweepRecord record_for(const ModelState& model, const LabeledDataset& test,
                       const AttackResult& res, double eps, const char* attack) {
  LabeledDataset attacked;
  attacked.images = res.adversarial;
  attacked.labels = test.labels;
  attacked.class_count = test.class_count;
  attacked.name = test.name + "/attacked";

  SweepRecord rec;
  rec.epsilon = eps;
  rec.top1_error = topk_error(model, attacked, 1);
  rec.top5_error = topk_error(model, attacked, std::min(5, test.class_count));
  rec.mean_l2 = res.mean_l2();
  rec.success_rate = res.success_rate();
  rec.attack = attack;
  return rec;
}

}  // namespace

std::vector<SweepRecord> cw_sweep_from_base(const ModelState& model, const LabeledDataset& test,
                                            const AttackResult& uncapped,
                                            std::span<const double> epsilons,
                                            const std::optional<int>& target) {
  check_epsilons(epsilons);
  std::vector<SweepRecord> records;
  records.reserve(epsilons.size());
  for (double eps : epsilons) {
    const AttackResult res = apply_epsilon_cap(model, test.images, test.labels, uncapped, eps, target);
    records.push_back(record_for(model, test, res, eps, "cw"));
  }
  return records;
}

std::vector<SweepRecord> epsilon_sweep(const ModelState& model, const LabeledDataset& test,
                                       AttackKind kind, std::span<const double> epsilons,
                                       const SweepOptions& options) {
  check_epsilons(epsilons);
  validate_dataset(test);

  if (kind == AttackKind::kCw) {
    // The CW optimization trajectory does not depend on the cap (the cap is
    // applied to the finished delta), so one uncapped run serves every epsilon.
    CwConfig uncapped = options.cw;
    uncapped.epsilon_cap.reset();
    const AttackResult base = cw_attack(model, test.images, test.labels, uncapped);
    return cw_sweep_from_base(model, test, base, epsilons, options.cw.target);
  }

  std::vector<SweepRecord> records;
  records.reserve(epsilons.size());
  for (double eps : epsilons) {
    AttackResult res;
    try {
      FgsmConfig cfg = options.fgsm;
      cfg.epsilon = eps;
      res = fgsm_attack(model, test.images, test.labels, cfg);
    } catch (const std::exception& e) {
      throw std::runtime_error("epsilon_sweep: epsilon " + std::to_string(eps) + ": " + e.what());
    }
    records.push_back(record_for(model, test, res, eps, "fgsm"));
  }
  return records;
}

std::vector<double> paper_fgsm_epsilons() {
  std::vector<double> eps;
  for (int i = 1; i <= 10; ++i) eps.push_back(i / 100.0);
  return eps;
}

std::vector<double> paper_distillation_epsilons() {
  return {0.0, 0.007, 0.01, 0.02, 0.03, 0.05, 0.10, 0.20, 0.30};
}

}  // namespace advw
