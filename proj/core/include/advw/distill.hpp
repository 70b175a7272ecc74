#pragma once

#include <cstdint>
#include <span>

#include "advw/attack.hpp"
#include "advw/data.hpp"
#include "advw/optim.hpp"

namespace advw {

struct DistillConfig {
  double temperature = 100.0;  // softening temperature shared by teacher and student
  double lambda = 1.0;         // weight of the distillation term; >= 0
  ModelSpec teacher_spec;
  ModelSpec student_spec;      // must have fewer parameters than the teacher
  int epochs = 10;
  int batch_size = 16;
  double learning_rate = 5e-3;
  std::uint64_t seed = 0;
  // Attack-side evaluation knobs. Attacks run against the deployed (T = 1)
  // model by default; attack_temperature exposes the alternative readings.
  double attack_temperature = 1.0;
  CwConfig cw;
};

void validate_distill_config(const DistillConfig& cfg);

// Teacher training: plain training with the loss computed through softmax at
// cfg.temperature.
TrainResult train_teacher(const LabeledDataset& train_ds, const LabeledDataset& val_ds,
                          const DistillConfig& cfg);

// Per-item softened teacher outputs: softmax_T(teacher logits), one row per
// item, each row summing to 1.
Tensor soften_labels(const ModelState& teacher, const LabeledDataset& ds, double temperature);

// Total Loss = Classification Loss + lambda * Distillation Loss, i.e.
// cross_entropy(student at T = 1, y_true) + lambda * KL(soft || student at T).
double distillation_total_loss(const Tensor& student_probs_at_temp, const Tensor& soft_labels,
                               const Tensor& student_probs_at_one, int y_true, double lambda);

// Student training on the combined loss against precomputed soft labels
// (rows aligned with the respective dataset's items). The validation loss
// is the same combined objective, so the plateau scheduler tracks what is
// actually optimized.
TrainResult train_student_distilled(const ModelState& init, const LabeledDataset& train_ds,
                                    const LabeledDataset& val_ds, const Tensor& soft_train,
                                    const Tensor& soft_val, const DistillConfig& cfg);

struct AttackSummary {
  double success_rate = 0.0;
  double mean_l2 = 0.0;
};

struct DistillReport {
  double teacher_clean_accuracy = 0.0;
  double distilled_clean_accuracy = 0.0;
  double baseline_clean_accuracy = 0.0;
  std::vector<SweepRecord> fgsm_distilled, fgsm_baseline;
  std::vector<SweepRecord> cw_distilled, cw_baseline;
  AttackSummary cw_uncapped_distilled, cw_uncapped_baseline;
  TrainHistory teacher_history, distilled_history, baseline_history;
};

struct DistillOutcome {
  ModelState teacher;
  ModelState distilled;   // student trained on the combined loss
  ModelState baseline;    // identically-seeded student trained on plain cross-entropy
  DistillReport report;
};

// Full pipeline: teacher at T, soft labels on the training split, distilled
// student on the combined loss, identically-seeded baseline student on plain
// cross-entropy, then clean and attacked evaluation of both students over
// the distillation epsilon grid.
DistillOutcome distill_pipeline(const LabeledDataset& full, const SplitSpec& split_spec,
                                const DistillConfig& cfg);

}  // namespace advw
