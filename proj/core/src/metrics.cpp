#include "advw/metrics.hpp"

#include <algorithm>
#include <stdexcept>

#include "advw/ops.hpp"

namespace advw {

namespace {
constexpr int kEvalBatch = 128;
}

Tensor dataset_logits(const ModelState& model, const LabeledDataset& ds) {
  Tensor logits = Tensor::zeros({ds.size(), model.spec.class_count});
  auto out = logits.data();
  for (int start = 0; start < ds.size(); start += kEvalBatch) {
    const int count = std::min(kEvalBatch, ds.size() - start);
    std::vector<int> items(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) items[static_cast<std::size_t>(i)] = start + i;
    const Tensor chunk = forward_logits(model, ds.gather(items));
    std::copy_n(chunk.data().begin(), chunk.size(),
                out.begin() + static_cast<std::size_t>(start) * model.spec.class_count);
  }
  return logits;
}

double topk_error_logits(const Tensor& logits, std::span<const int> labels, int k) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("topk_error: logits must be [N x K], got " +
                                Tensor::shape_string(logits.shape()));
  }
  const int n = logits.dim(0), classes = logits.dim(1);
  if (k < 1 || k > classes) {
    throw std::invalid_argument("topk_error: k = " + std::to_string(k) +
                                " out of range [1, " + std::to_string(classes) + "]");
  }
  if (static_cast<int>(labels.size()) != n) {
    throw std::invalid_argument("topk_error: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(n) + " rows");
  }
  int misses = 0;
  for (int r = 0; r < n; ++r) {
    const int label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= classes) {
      throw std::invalid_argument("topk_error: label " + std::to_string(label) + " out of range");
    }
    const double own = logits.at2(r, label);
    // rank = number of classes ahead of the label; ties rank lower index first
    int ahead = 0;
    for (int c = 0; c < classes; ++c) {
      if (c == label) continue;
      const double v = logits.at2(r, c);
      if (v > own || (v == own && c < label)) ++ahead;
    }
    if (ahead >= k) ++misses;
  }
  return static_cast<double>(misses) / n;
}

double topk_error(const ModelState& model, const LabeledDataset& ds, int k) {
  return topk_error_logits(dataset_logits(model, ds), ds.labels, k);
}

double accuracy(const ModelState& model, const LabeledDataset& ds) {
  return 1.0 - topk_error(model, ds, 1);
}

std::vector<ConfidenceReport> confidence_report(const ModelState& model, const LabeledDataset& ds,
                                                std::span<const int> indices,
                                                std::span<const std::string> class_names) {
  const int classes = model.spec.class_count;
  if (static_cast<int>(class_names.size()) != classes) {
    throw std::invalid_argument("confidence_report: " + std::to_string(class_names.size()) +
                                " class names for " + std::to_string(classes) + " classes");
  }
  if (classes < 5) {
    throw std::invalid_argument("confidence_report: needs at least 5 classes");
  }
  std::vector<ConfidenceReport> reports;
  reports.reserve(indices.size());
  for (int idx : indices) {
    if (idx < 0 || idx >= ds.size()) {
      throw std::invalid_argument("confidence_report: index " + std::to_string(idx) +
                                  " out of range [0, " + std::to_string(ds.size()) + ")");
    }
    std::vector<int> one{idx};
    const Tensor logits = forward_logits(model, ds.gather(one));
    const Tensor probs = softmax_with_temperature(logits.reshaped({classes}), 1.0);

    std::vector<int> order(static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c) order[static_cast<std::size_t>(c)] = c;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
    });

    ConfidenceReport rep;
    rep.item_index = idx;
    rep.true_class = class_names[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(idx)])];
    for (int i = 0; i < 5; ++i) {
      const int c = order[static_cast<std::size_t>(i)];
      rep.top5.push_back({class_names[static_cast<std::size_t>(c)], probs[static_cast<std::size_t>(c)]});
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

CurveSummary robustness_curve(std::span<const SweepRecord> records) {
  if (records.empty()) throw std::invalid_argument("robustness_curve: no records");
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].epsilon < records[i - 1].epsilon) {
      throw std::invalid_argument("robustness_curve: records must be sorted by epsilon");
    }
  }
  CurveSummary s;
  for (const SweepRecord& r : records) {
    s.peak_top1 = std::max(s.peak_top1, r.top1_error);
    s.peak_top5 = std::max(s.peak_top5, r.top5_error);
  }
  s.saturation_epsilon = records.back().epsilon;
  for (const SweepRecord& r : records) {
    if (r.top1_error >= 0.95 * s.peak_top1) {
      s.saturation_epsilon = r.epsilon;
      break;
    }
  }
  return s;
}

}  // namespace advw
