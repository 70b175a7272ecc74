#pragma once

#include <span>
#include <string>
#include <vector>

#include "advw/data.hpp"
#include "advw/model.hpp"

namespace advw {

// One row of a robustness table: errors are fractions in [0, 1] internally
// and only formatted as percent at the reporting boundary.
struct SweepRecord {
  double epsilon = 0.0;
  double top1_error = 0.0;
  double top5_error = 0.0;
  double mean_l2 = 0.0;
  double success_rate = 0.0;
  std::string attack;  // "fgsm", "cw" or "clean"
};

// Fraction of rows whose true label is not among the k highest logits.
// Ties rank the lower class index first, so results are deterministic even
// on deliberately tied logits.
double topk_error_logits(const Tensor& logits, std::span<const int> labels, int k);

double topk_error(const ModelState& model, const LabeledDataset& ds, int k);

// Convenience: 1 - top-1 error.
double accuracy(const ModelState& model, const LabeledDataset& ds);

// Batched logits over a dataset, evaluated in fixed-size chunks.
Tensor dataset_logits(const ModelState& model, const LabeledDataset& ds);

struct ConfidenceEntry {
  std::string class_name;
  double confidence = 0.0;
};

struct ConfidenceReport {
  int item_index = 0;
  std::string true_class;
  std::vector<ConfidenceEntry> top5;  // descending confidence
};

// Per-item softmax (T = 1) probabilities with the five most confident class
// names, in the style of a per-image classification table.
std::vector<ConfidenceReport> confidence_report(const ModelState& model, const LabeledDataset& ds,
                                                std::span<const int> indices,
                                                std::span<const std::string> class_names);

struct CurveSummary {
  double peak_top1 = 0.0;
  double peak_top5 = 0.0;
  double saturation_epsilon = 0.0;  // smallest epsilon reaching >= 95% of peak top-1 error
};

// Records must be sorted by epsilon and nonempty.
CurveSummary robustness_curve(std::span<const SweepRecord> records);

}  // namespace advw
