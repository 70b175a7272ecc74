#include "advw/distill.hpp"

#include <cmath>
#include <stdexcept>

#include "advw/ops.hpp"

namespace advw {

void validate_distill_config(const DistillConfig& cfg) {
  if (cfg.temperature <= 0.0) throw std::invalid_argument("distill: temperature must be positive");
  if (cfg.lambda < 0.0) throw std::invalid_argument("distill: lambda must be nonnegative");
  if (cfg.epochs < 1) throw std::invalid_argument("distill: epochs must be at least 1");
  if (param_count(cfg.student_spec) >= param_count(cfg.teacher_spec)) {
    throw std::invalid_argument("distill: student must have fewer parameters than the teacher");
  }
}

TrainResult train_teacher(const LabeledDataset& train_ds, const LabeledDataset& val_ds,
                          const DistillConfig& cfg) {
  validate_distill_config(cfg);
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.initial_lr = cfg.learning_rate;
  tc.temperature = cfg.temperature;
  tc.seed = cfg.seed;
  return train(init_params(cfg.teacher_spec, cfg.seed), train_ds, val_ds, tc);
}

Tensor soften_labels(const ModelState& teacher, const LabeledDataset& ds, double temperature) {
  const Tensor logits = dataset_logits(teacher, ds);
  return softmax_with_temperature(logits, temperature);
}

double distillation_total_loss(const Tensor& student_probs_at_temp, const Tensor& soft_labels,
                               const Tensor& student_probs_at_one, int y_true, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("distillation_total_loss: lambda must be >= 0");
  const double classification = cross_entropy(student_probs_at_one, y_true);
  if (lambda == 0.0) return classification;
  return classification + lambda * kl_divergence(soft_labels, student_probs_at_temp);
}

namespace {

// Combined loss builder over precomputed soft-label rows. With lambda = 0
// the distillation branch is skipped entirely, so the trajectory is bitwise
// identical to ordinary training on the classification loss.
BatchLossFn distillation_loss(const Tensor& soft, double temperature, double lambda, int classes) {
  const Tensor* soft_ptr = &soft;
  return [temperature, lambda, classes, soft_ptr](Tape& tape, NodeId logits,
                                                  std::span<const int> items,
                                                  std::span<const int> labels) {
    NodeId probs_at_one = tape.softmax_t(logits, 1.0);
    NodeId classification = tape.cross_entropy(probs_at_one, labels, Reduction::kMean);
    if (lambda == 0.0) return classification;

    Tensor soft_batch = Tensor::zeros({static_cast<int>(items.size()), classes});
    for (std::size_t r = 0; r < items.size(); ++r) {
      for (int c = 0; c < classes; ++c) {
        soft_batch[r * static_cast<std::size_t>(classes) + c] =
            (*soft_ptr)[static_cast<std::size_t>(items[r]) * classes + c];
      }
    }
    NodeId probs_at_temp = tape.softmax_t(logits, temperature);
    NodeId distillation =
        tape.kl_divergence(tape.leaf(std::move(soft_batch)), probs_at_temp, Reduction::kMean);
    return tape.add(classification, tape.scale(distillation, lambda));
  };
}

}  // namespace

TrainResult train_student_distilled(const ModelState& init, const LabeledDataset& train_ds,
                                    const LabeledDataset& val_ds, const Tensor& soft_train,
                                    const Tensor& soft_val, const DistillConfig& cfg) {
  const auto check_rows = [](const Tensor& soft, const LabeledDataset& ds, const char* which) {
    if (soft.rank() != 2 || soft.dim(0) != ds.size() || soft.dim(1) != ds.class_count) {
      throw std::invalid_argument(std::string("distill: soft labels for the ") + which +
                                  " set must be [N x K] aligned with it");
    }
  };
  check_rows(soft_train, train_ds, "training");
  check_rows(soft_val, val_ds, "validation");

  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.initial_lr = cfg.learning_rate;
  tc.temperature = 1.0;
  tc.seed = cfg.seed;
  return train_with_loss(init, train_ds, val_ds, tc,
                         distillation_loss(soft_train, cfg.temperature, cfg.lambda,
                                           train_ds.class_count),
                         distillation_loss(soft_val, cfg.temperature, cfg.lambda,
                                           val_ds.class_count));
}

DistillOutcome distill_pipeline(const LabeledDataset& full, const SplitSpec& split_spec,
                                const DistillConfig& cfg) {
  validate_distill_config(cfg);
  const Splits splits = split(full, split_spec);

  DistillOutcome out;
  TrainResult teacher = train_teacher(splits.train, splits.val, cfg);
  out.teacher = std::move(teacher.model);
  out.report.teacher_history = std::move(teacher.history);

  const Tensor soft_train = soften_labels(out.teacher, splits.train, cfg.temperature);
  const Tensor soft_val = soften_labels(out.teacher, splits.val, cfg.temperature);

  const ModelState student_init = init_params(cfg.student_spec, cfg.seed);
  TrainResult distilled =
      train_student_distilled(student_init, splits.train, splits.val, soft_train, soft_val, cfg);
  out.distilled = std::move(distilled.model);
  out.report.distilled_history = std::move(distilled.history);

  // Baseline shares the init seed and batch order so the comparison isolates
  // the loss function.
  TrainConfig base_cfg;
  base_cfg.epochs = cfg.epochs;
  base_cfg.batch_size = cfg.batch_size;
  base_cfg.initial_lr = cfg.learning_rate;
  base_cfg.temperature = 1.0;
  base_cfg.seed = cfg.seed;
  TrainResult baseline = train(student_init, splits.train, splits.val, base_cfg);
  out.baseline = std::move(baseline.model);
  out.report.baseline_history = std::move(baseline.history);

  out.report.teacher_clean_accuracy = accuracy(out.teacher, splits.test);
  out.report.distilled_clean_accuracy = accuracy(out.distilled, splits.test);
  out.report.baseline_clean_accuracy = accuracy(out.baseline, splits.test);

  const std::vector<double> grid = paper_distillation_epsilons();
  SweepOptions opts;
  opts.fgsm.temperature = cfg.attack_temperature;
  opts.cw = cfg.cw;
  out.report.fgsm_distilled = epsilon_sweep(out.distilled, splits.test, AttackKind::kFgsm, grid, opts);
  out.report.fgsm_baseline = epsilon_sweep(out.baseline, splits.test, AttackKind::kFgsm, grid, opts);

  // One uncapped CW run per student backs both the capped sweep and the
  // uncapped summary.
  CwConfig uncapped = cfg.cw;
  uncapped.epsilon_cap.reset();
  const AttackResult cw_d = cw_attack(out.distilled, splits.test.images, splits.test.labels, uncapped);
  const AttackResult cw_b = cw_attack(out.baseline, splits.test.images, splits.test.labels, uncapped);
  out.report.cw_distilled = cw_sweep_from_base(out.distilled, splits.test, cw_d, grid, cfg.cw.target);
  out.report.cw_baseline = cw_sweep_from_base(out.baseline, splits.test, cw_b, grid, cfg.cw.target);
  out.report.cw_uncapped_distilled = {cw_d.success_rate(), cw_d.mean_l2()};
  out.report.cw_uncapped_baseline = {cw_b.success_rate(), cw_b.mean_l2()};
  return out;
}

}  // namespace advw
