#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "advw/tape.hpp"
#include "advw/tensor.hpp"

namespace advw {

struct ConvLayer {
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
};
struct DenseLayer {
  int out_features = 0;
};
struct ReluLayer {};
struct FlattenLayer {};

using Layer = std::variant<ConvLayer, DenseLayer, ReluLayer, FlattenLayer>;

// Declarative classifier architecture. input_shape is [C, H, W] for image
// input or [D] for flat input; the last layer must emit class_count logits.
struct ModelSpec {
  std::vector<int> input_shape;
  std::vector<Layer> layers;
  int class_count = 0;
};

// Verifies that consecutive layer shapes compose and that the final layer
// emits exactly class_count logits. Returns the per-item output shape of
// each layer; throws invalid_argument naming the first non-composing layer.
std::vector<std::vector<int>> shape_check(const ModelSpec& spec);

struct Param {
  std::string name;
  Tensor value;
};

// Architecture plus learned parameters. Parameter names and shapes are a
// pure function of the spec; the init seed is kept for reproducibility.
struct ModelState {
  ModelSpec spec;
  std::vector<Param> params;
  std::uint64_t seed = 0;
};

// He-uniform weights (bound sqrt(6 / fan_in)) and zero biases, drawn from
// the module PRNG in parameter order; deterministic per seed.
ModelState init_params(const ModelSpec& spec, std::uint64_t seed);

std::size_t param_count(const ModelSpec& spec);
std::size_t param_count(const ModelState& state);

// Logits for a batch; no softmax is applied. batch is [B, C, H, W] for image
// input specs or [B, D] for flat ones.
Tensor forward_logits(const ModelState& model, const Tensor& batch);

// A model bound onto a tape: parameter leaves plus the layer program.
// Used wherever gradients with respect to parameters or inputs are needed.
struct TapedModel {
  Tape* tape = nullptr;
  const ModelSpec* spec = nullptr;
  std::vector<NodeId> params;

  NodeId logits(NodeId batch_input) const;
};

TapedModel bind_model(Tape& tape, const ModelState& model);

// Exact gradient of cross_entropy(softmax_T(logits), y_true) with respect to
// the input, parameters frozen. x is a single item shaped like the spec input.
Tensor input_gradient(const ModelState& model, const Tensor& x, int y_true, double temperature);

// Batched variant: gradient of the summed per-item losses, so each item's
// slice is exactly its own input gradient.
Tensor input_gradient_batch(const ModelState& model, const Tensor& batch,
                            std::span<const int> labels, double temperature);

// Named desk-scale architectures: "teacher-cnn" (two conv blocks + two dense
// layers), "student-cnn" (one conv block + two dense layers, under half the
// teacher's parameter count) and "mlp" (two dense layers).
std::vector<std::pair<std::string, ModelSpec>> reference_specs(std::vector<int> input_shape = {1, 16, 16},
                                                               int class_count = 10);

// Looks up one of the reference specs by name; throws on unknown names.
ModelSpec reference_spec(const std::string& name, std::vector<int> input_shape = {1, 16, 16},
                         int class_count = 10);

}  // namespace advw
