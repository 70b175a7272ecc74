#include <benchmark/benchmark.h>

#include "advw/attack.hpp"
#include "advw/data.hpp"
#include "advw/model.hpp"
#include "advw/optim.hpp"

namespace {

advw::LabeledDataset small_set() { return advw::generate_synthetic(10, 8, 16, 7); }

void BM_forward_student(benchmark::State& state) {
  const auto ds = small_set();
  const auto model = advw::init_params(advw::reference_spec("student-cnn"), 1);
  std::vector<int> items(static_cast<std::size_t>(state.range(0)));
  for (int i = 0; i < state.range(0); ++i) items[static_cast<std::size_t>(i)] = i;
  const advw::Tensor batch = ds.gather(items);
  for (auto _ : state) {
    benchmark::DoNotOptimize(advw::forward_logits(model, batch));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_forward_student)->Arg(1)->Arg(16)->Arg(64);

void BM_backward_student(benchmark::State& state) {
  const auto ds = small_set();
  const auto model = advw::init_params(advw::reference_spec("student-cnn"), 1);
  std::vector<int> items(static_cast<std::size_t>(state.range(0)));
  std::vector<int> labels(static_cast<std::size_t>(state.range(0)));
  for (int i = 0; i < state.range(0); ++i) {
    items[static_cast<std::size_t>(i)] = i;
    labels[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(i)];
  }
  const advw::Tensor batch = ds.gather(items);
  for (auto _ : state) {
    advw::Tape tape;
    advw::TapedModel bound = advw::bind_model(tape, model);
    advw::NodeId logits = bound.logits(tape.leaf(batch));
    advw::NodeId probs = tape.softmax_t(logits, 1.0);
    advw::NodeId loss = tape.cross_entropy(probs, labels, advw::Reduction::kMean);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(bound.params[0]));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_backward_student)->Arg(1)->Arg(16)->Arg(64);

void BM_fgsm(benchmark::State& state) {
  const auto ds = small_set();
  const auto model = advw::init_params(advw::reference_spec("student-cnn"), 1);
  advw::FgsmConfig cfg;
  cfg.epsilon = 0.04;
  for (auto _ : state) {
    benchmark::DoNotOptimize(advw::fgsm_attack(model, ds.images, ds.labels, cfg));
  }
  state.SetItemsProcessed(state.iterations() * ds.size());
}
BENCHMARK(BM_fgsm);

void BM_cw_iterations(benchmark::State& state) {
  const auto ds = small_set();
  const auto model = advw::init_params(advw::reference_spec("student-cnn"), 1);
  std::vector<int> one{0};
  const advw::Tensor batch = ds.gather(one);
  advw::CwConfig cfg;
  cfg.max_iterations = static_cast<int>(state.range(0));
  const int labels[] = {ds.labels[0]};
  for (auto _ : state) {
    benchmark::DoNotOptimize(advw::cw_attack(model, batch, labels, cfg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_cw_iterations)->Arg(10)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
