#include <cmath>

#include <doctest.h>

#include "advw/distill.hpp"
#include "advw/metrics.hpp"
#include "advw/ops.hpp"
#include "helpers.hpp"

using advw::DistillConfig;
using advw::LabeledDataset;
using advw::ModelState;
using advw::Tensor;

namespace {

DistillConfig small_config(std::uint64_t seed) {
  DistillConfig cfg;
  cfg.teacher_spec = advw::reference_spec("teacher-cnn", {1, 8, 8}, 6);
  cfg.student_spec = advw::reference_spec("student-cnn", {1, 8, 8}, 6);
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("distill config validation") {
  DistillConfig cfg = small_config(1);
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(advw::validate_distill_config(cfg), std::invalid_argument);
  cfg = small_config(1);
  cfg.lambda = -0.5;
  CHECK_THROWS_AS(advw::validate_distill_config(cfg), std::invalid_argument);
  cfg = small_config(1);
  std::swap(cfg.teacher_spec, cfg.student_spec);  // student larger than teacher
  CHECK_THROWS_AS(advw::validate_distill_config(cfg), std::invalid_argument);
}

TEST_CASE("teacher learns the synthetic default at temperature 100") {
  const LabeledDataset ds = advw::generate_synthetic(10, 300, 16, 7);
  const advw::Splits splits = advw::split(ds, advw::SplitSpec{2400, 300, 300, 7});
  DistillConfig cfg;
  cfg.teacher_spec = advw::reference_spec("teacher-cnn", {1, 16, 16}, 10);
  cfg.student_spec = advw::reference_spec("student-cnn", {1, 16, 16}, 10);
  cfg.seed = 7;
  const advw::TrainResult a = advw::train_teacher(splits.train, splits.val, cfg);
  CHECK(a.history.train_loss.size() == 10);
  CHECK(a.history.val_loss.size() == 10);
  // evaluated at T = 1 after training at T = 100
  CHECK(advw::accuracy(a.model, splits.train) >= 0.90);
}

TEST_CASE("teacher training is deterministic per seed") {
  const LabeledDataset ds = advw::generate_synthetic(6, 60, 8, 77);
  const advw::Splits splits = advw::split(ds, advw::SplitSpec{280, 40, 40, 77});
  DistillConfig cfg = small_config(77);
  cfg.epochs = 2;
  const advw::TrainResult a = advw::train_teacher(splits.train, splits.val, cfg);
  const advw::TrainResult b = advw::train_teacher(splits.train, splits.val, cfg);
  for (std::size_t i = 0; i < a.model.params.size(); ++i) {
    for (std::size_t e = 0; e < a.model.params[i].value.size(); ++e) {
      CHECK(a.model.params[i].value[e] == b.model.params[i].value[e]);
    }
  }
}

TEST_CASE("soft labels behave across temperatures") {
  const LabeledDataset ds = advw::generate_synthetic(6, 5, 8, 13);
  const ModelState teacher = advw::init_params(advw::reference_spec("teacher-cnn", {1, 8, 8}, 6), 13);

  const Tensor logits = advw::dataset_logits(teacher, ds);
  const Tensor hot = advw::soften_labels(teacher, ds, 1e6);
  const Tensor cold = advw::soften_labels(teacher, ds, 1.0);
  REQUIRE(hot.shape() == std::vector<int>{ds.size(), 6});

  for (int r = 0; r < ds.size(); ++r) {
    double row_sum = 0.0;
    for (int c = 0; c < 6; ++c) {
      // near-uniform at extreme temperature
      CHECK(std::abs(hot.at2(r, c) - 1.0 / 6.0) < 1e-3);
      row_sum += hot.at2(r, c);
    }
    CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));

    // T = 1 equals the ordinary predictive distribution
    std::vector<double> row(6);
    for (int c = 0; c < 6; ++c) row[static_cast<std::size_t>(c)] = logits.at2(r, c);
    const Tensor plain = advw::softmax_with_temperature(Tensor({6}, row), 1.0);
    for (int c = 0; c < 6; ++c) CHECK(cold.at2(r, c) == plain[static_cast<std::size_t>(c)]);
  }

  // argmax is preserved at every temperature
  for (double t : {2.0, 10.0, 100.0}) {
    const Tensor soft = advw::soften_labels(teacher, ds, t);
    for (int r = 0; r < ds.size(); ++r) {
      CHECK(advw::argmax(soft.data().subspan(static_cast<std::size_t>(r) * 6, 6)) ==
            advw::argmax(logits.data().subspan(static_cast<std::size_t>(r) * 6, 6)));
    }
  }
}

TEST_CASE("distillation total loss closed forms") {
  const Tensor soft({2}, {0.8, 0.2});
  const Tensor at_temp({2}, {0.6, 0.4});
  const Tensor one_hot({2}, {1.0, 0.0});

  // lambda = 0 reduces to the classification cross-entropy
  const Tensor some_probs({2}, {0.7, 0.3});
  CHECK(advw::distillation_total_loss(at_temp, soft, some_probs, 0, 0.0) ==
        advw::cross_entropy(some_probs, 0));

  // perfect student: zero loss at any lambda
  for (double lambda : {0.0, 1.0, 7.5}) {
    CHECK(advw::distillation_total_loss(soft, soft, one_hot, 0, lambda) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }

  // hand-computed K = 2 case
  const double expected_kl = 0.8 * std::log(0.8 / 0.6) + 0.2 * std::log(0.2 / 0.4);
  for (double lambda : {0.5, 1.0, 2.0}) {
    CHECK(advw::distillation_total_loss(at_temp, soft, one_hot, 0, lambda) ==
          doctest::Approx(lambda * expected_kl).epsilon(1e-12));
  }

  CHECK_THROWS_AS(advw::distillation_total_loss(at_temp, Tensor::zeros({3}), one_hot, 0, 1.0),
                  std::invalid_argument);
}

TEST_CASE("lambda zero student training degenerates to plain training bitwise") {
  const LabeledDataset ds = advw::generate_synthetic(6, 20, 8, 3);
  const advw::Splits splits = advw::split(ds, advw::SplitSpec{80, 20, 20, 3});
  DistillConfig cfg = small_config(3);
  cfg.lambda = 0.0;
  cfg.epochs = 2;

  const ModelState init = advw::init_params(cfg.student_spec, 3);
  const ModelState teacher = advw::init_params(cfg.teacher_spec, 3);
  const Tensor soft_train = advw::soften_labels(teacher, splits.train, cfg.temperature);
  const Tensor soft_val = advw::soften_labels(teacher, splits.val, cfg.temperature);
  const advw::TrainResult distilled =
      advw::train_student_distilled(init, splits.train, splits.val, soft_train, soft_val, cfg);

  advw::TrainConfig plain;
  plain.epochs = cfg.epochs;
  plain.batch_size = cfg.batch_size;
  plain.initial_lr = cfg.learning_rate;
  plain.temperature = 1.0;
  plain.seed = cfg.seed;
  const advw::TrainResult baseline = advw::train(init, splits.train, splits.val, plain);

  for (std::size_t i = 0; i < distilled.model.params.size(); ++i) {
    for (std::size_t e = 0; e < distilled.model.params[i].value.size(); ++e) {
      CHECK(distilled.model.params[i].value[e] == baseline.model.params[i].value[e]);
    }
  }
  CHECK(distilled.history.train_loss == baseline.history.train_loss);
}

TEST_CASE("distill pipeline produces a coherent report on a small run") {
  const LabeledDataset ds = advw::generate_synthetic(6, 30, 8, 21);
  DistillConfig cfg = small_config(21);
  cfg.epochs = 4;
  cfg.cw.max_iterations = 40;
  const advw::DistillOutcome out =
      advw::distill_pipeline(ds, advw::SplitSpec{120, 30, 30, 21}, cfg);

  CHECK(advw::param_count(out.teacher) > advw::param_count(out.distilled));
  CHECK(advw::param_count(out.distilled) == advw::param_count(out.baseline));
  CHECK(out.report.teacher_history.train_loss.size() == 4);
  CHECK(out.report.distilled_history.train_loss.size() == 4);
  CHECK(out.report.baseline_history.train_loss.size() == 4);

  const auto grid = advw::paper_distillation_epsilons();
  for (const auto* records : {&out.report.fgsm_distilled, &out.report.fgsm_baseline,
                              &out.report.cw_distilled, &out.report.cw_baseline}) {
    REQUIRE(records->size() == grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK((*records)[i].epsilon == grid[i]);
      CHECK((*records)[i].top5_error <= (*records)[i].top1_error);
    }
  }
  // epsilon = 0 rows are clean evaluations
  CHECK(out.report.fgsm_distilled[0].top1_error ==
        doctest::Approx(1.0 - out.report.distilled_clean_accuracy));
  CHECK(out.report.fgsm_baseline[0].top1_error ==
        doctest::Approx(1.0 - out.report.baseline_clean_accuracy));
  CHECK(out.report.cw_uncapped_distilled.success_rate >= 0.0);
  CHECK(out.report.cw_uncapped_baseline.success_rate <= 1.0);
}
