#pragma once

#include <optional>
#include <span>
#include <vector>

#include "advw/data.hpp"
#include "advw/metrics.hpp"
#include "advw/model.hpp"

namespace advw {

struct FgsmConfig {
  double epsilon = 0.02;       // fraction of the pixel range [0, 1]
  double temperature = 1.0;    // loss temperature of the attacked gradient
};

struct CwConfig {
  double c = 1.0;              // misclassification-loss weight, must be positive
  double kappa = 0.0;          // confidence margin, >= 0
  int max_iterations = 500;
  double step_size = 0.01;
  std::optional<int> target;   // targeted mode: drive prediction to this class
  // Optional post-hoc L-inf cap on delta so CW shares a sweep axis with
  // FGSM; absent means the pure, uncapped attack (equivalent to cap = 1).
  std::optional<double> epsilon_cap;
};

// Adversarial batch plus bookkeeping. Pixels always stay in [0, 1];
// success[i] means the prediction differs from labels[i] (or equals the
// target class in targeted mode).
struct AttackResult {
  Tensor adversarial;                 // same shape as the input batch
  std::vector<bool> success;
  std::vector<double> l2;             // per-item L2 norm of delta
  std::vector<double> linf;           // per-item L-inf norm of delta
  std::vector<int> iterations_used;

  double success_rate() const;
  double mean_l2() const;
};

// Single signed-gradient step:
//   x_adv = clamp_[0,1](x + epsilon * sign(input_gradient(model, x, y, T)))
// with sign(0) = 0, so L-inf(delta) <= epsilon by construction.
AttackResult fgsm_attack(const ModelState& model, const Tensor& batch, std::span<const int> labels,
                         const FgsmConfig& cfg);

// Per item, minimizes ||delta||_2^2 + c * f(x + delta) by Adam on delta,
// projecting x + delta onto [0, 1]^n after each step. f is the logit margin
// max(Z_y - max_{i != y} Z_i, -kappa) (roles swapped in targeted mode).
// Returns the lowest-objective successful iterate, otherwise the final
// iterate with success = false. A configured epsilon_cap is applied to the
// chosen delta afterwards and success is re-evaluated.
AttackResult cw_attack(const ModelState& model, const Tensor& batch, std::span<const int> labels,
                       const CwConfig& cfg);

// Clamps result deltas to [-cap, cap], reprojects onto the pixel box and
// re-evaluates success. cw_attack with epsilon_cap set is exactly
// apply_epsilon_cap applied to the uncapped result, which is what lets a
// sweep reuse one optimization run across all cap values.
AttackResult apply_epsilon_cap(const ModelState& model, const Tensor& batch,
                               std::span<const int> labels, const AttackResult& uncapped,
                               double cap, const std::optional<int>& target = std::nullopt);

enum class AttackKind { kFgsm, kCw };

struct SweepOptions {
  FgsmConfig fgsm;
  CwConfig cw;
};

// Attacks the whole set once per epsilon and records (epsilon, top-1 error,
// top-5 error, mean L2, success rate). For CW the epsilon populates the
// post-hoc cap.
std::vector<SweepRecord> epsilon_sweep(const ModelState& model, const LabeledDataset& test,
                                       AttackKind kind, std::span<const double> epsilons,
                                       const SweepOptions& options = {});

// Sweep records derived from a finished uncapped CW run by applying each
// epsilon as the post-hoc cap; identical to epsilon_sweep(kCw) given the
// same base run.
std::vector<SweepRecord> cw_sweep_from_base(const ModelState& model, const LabeledDataset& test,
                                            const AttackResult& uncapped,
                                            std::span<const double> epsilons,
                                            const std::optional<int>& target = std::nullopt);

// The two sweep grids used by the reporting defaults: 1%..10% in steps of
// 1%, and {0, 0.7, 1, 2, 3, 5, 10, 20, 30}%.
std::vector<double> paper_fgsm_epsilons();
std::vector<double> paper_distillation_epsilons();

}  // namespace advw
