#include "advw/model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "advw/rng.hpp"

namespace advw {

namespace {

std::string layer_label(std::size_t index, const Layer& layer) {
  const char* kind = std::visit(
      [](auto&& l) -> const char* {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, ConvLayer>) return "conv";
        if constexpr (std::is_same_v<T, DenseLayer>) return "dense";
        if constexpr (std::is_same_v<T, ReluLayer>) return "relu";
        return "flatten";
      },
      layer);
  return "layer " + std::to_string(index) + " (" + std::string(kind) + ")";
}

[[noreturn]] void spec_error(std::size_t index, const Layer& layer, const std::string& what) {
  throw std::invalid_argument("invalid model spec: " + layer_label(index, layer) + ": " + what);
}

int flat_size(const std::vector<int>& shape) {
  return static_cast<int>(Tensor::element_count(shape));
}

}  // namespace

std::vector<std::vector<int>> shape_check(const ModelSpec& spec) {
  if (spec.input_shape.size() != 1 && spec.input_shape.size() != 3) {
    throw std::invalid_argument("invalid model spec: input shape must be [D] or [C x H x W], got " +
                                Tensor::shape_string(spec.input_shape));
  }
  for (int d : spec.input_shape) {
    if (d <= 0) throw std::invalid_argument("invalid model spec: non-positive input dimension");
  }
  if (spec.class_count < 2) {
    throw std::invalid_argument("invalid model spec: class count must be at least 2");
  }
  std::vector<std::vector<int>> shapes;
  std::vector<int> cur = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Layer& layer = spec.layers[i];
    if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      if (cur.size() != 3) spec_error(i, layer, "needs [C x H x W] input, has " + Tensor::shape_string(cur));
      if (conv->out_channels <= 0 || conv->kernel <= 0 || conv->stride <= 0) {
        spec_error(i, layer, "channels, kernel and stride must be positive");
      }
      if (conv->kernel > cur[1] || conv->kernel > cur[2]) {
        spec_error(i, layer, "kernel " + std::to_string(conv->kernel) + " exceeds input " +
                                 std::to_string(cur[1]) + "x" + std::to_string(cur[2]));
      }
      cur = {conv->out_channels, (cur[1] - conv->kernel) / conv->stride + 1,
             (cur[2] - conv->kernel) / conv->stride + 1};
    } else if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      if (cur.size() != 1) {
        spec_error(i, layer, "needs a flat feature vector, has " + Tensor::shape_string(cur) +
                                 "; insert a flatten layer");
      }
      if (dense->out_features <= 0) spec_error(i, layer, "out features must be positive");
      cur = {dense->out_features};
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      cur = {flat_size(cur)};
    }
    // relu keeps the shape
    shapes.push_back(cur);
  }
  if (cur.size() != 1 || cur[0] != spec.class_count) {
    throw std::invalid_argument("invalid model spec: final layer emits " +
                                Tensor::shape_string(cur) + ", expected [" +
                                std::to_string(spec.class_count) + "] logits");
  }
  return shapes;
}

ModelState init_params(const ModelSpec& spec, std::uint64_t seed) {
  shape_check(spec);
  ModelState state;
  state.spec = spec;
  state.seed = seed;
  Rng rng(seed);

  std::vector<int> cur = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const std::string prefix = "l" + std::to_string(i);
    if (const auto* conv = std::get_if<ConvLayer>(&spec.layers[i])) {
      const int fan_in = cur[0] * conv->kernel * conv->kernel;
      const double bound = std::sqrt(6.0 / fan_in);
      Tensor w = Tensor::zeros({conv->out_channels, cur[0], conv->kernel, conv->kernel});
      for (double& v : w.data()) v = rng.uniform(-bound, bound);
      state.params.push_back({prefix + ".conv.weight", std::move(w)});
      state.params.push_back({prefix + ".conv.bias", Tensor::zeros({conv->out_channels})});
      cur = {conv->out_channels, (cur[1] - conv->kernel) / conv->stride + 1,
             (cur[2] - conv->kernel) / conv->stride + 1};
    } else if (const auto* dense = std::get_if<DenseLayer>(&spec.layers[i])) {
      const int fan_in = cur[0];
      const double bound = std::sqrt(6.0 / fan_in);
      Tensor w = Tensor::zeros({fan_in, dense->out_features});
      for (double& v : w.data()) v = rng.uniform(-bound, bound);
      state.params.push_back({prefix + ".dense.weight", std::move(w)});
      state.params.push_back({prefix + ".dense.bias", Tensor::zeros({dense->out_features})});
      cur = {dense->out_features};
    } else if (std::holds_alternative<FlattenLayer>(spec.layers[i])) {
      cur = {flat_size(cur)};
    }
  }
  return state;
}

std::size_t param_count(const ModelSpec& spec) {
  return param_count(init_params(spec, 0));
}

std::size_t param_count(const ModelState& state) {
  std::size_t n = 0;
  for (const Param& p : state.params) n += p.value.size();
  return n;
}

NodeId TapedModel::logits(NodeId batch_input) const {
  Tape& t = *tape;
  const Tensor& in = t.value(batch_input);
  const std::vector<int>& item = spec->input_shape;
  if (in.rank() != static_cast<int>(item.size()) + 1) {
    throw std::invalid_argument("forward: batch rank " + std::to_string(in.rank()) +
                                " does not match input shape " + Tensor::shape_string(item));
  }
  for (std::size_t i = 0; i < item.size(); ++i) {
    if (in.dim(static_cast<int>(i) + 1) != item[i]) {
      throw std::invalid_argument("forward: batch shape " + Tensor::shape_string(in.shape()) +
                                  " does not match input shape " + Tensor::shape_string(item));
    }
  }
  const int batch = in.dim(0);

  NodeId cur = batch_input;
  std::size_t param_at = 0;
  std::vector<int> cur_shape = item;
  for (const Layer& layer : spec->layers) {
    if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      NodeId w = params[param_at++];
      NodeId b = params[param_at++];
      cur = t.conv2d(cur, w, b, conv->stride);
      cur_shape = {conv->out_channels, (cur_shape[1] - conv->kernel) / conv->stride + 1,
                   (cur_shape[2] - conv->kernel) / conv->stride + 1};
    } else if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      NodeId w = params[param_at++];
      NodeId b = params[param_at++];
      cur = t.add_row_bias(t.matmul(cur, w), b);
      cur_shape = {dense->out_features};
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      cur = t.relu(cur);
    } else {
      cur = t.reshape(cur, {batch, flat_size(cur_shape)});
      cur_shape = {flat_size(cur_shape)};
    }
  }
  return cur;
}

TapedModel bind_model(Tape& tape, const ModelState& model) {
  TapedModel bound;
  bound.tape = &tape;
  bound.spec = &model.spec;
  bound.params.reserve(model.params.size());
  for (const Param& p : model.params) bound.params.push_back(tape.leaf(p.value));
  return bound;
}

Tensor forward_logits(const ModelState& model, const Tensor& batch) {
  Tape tape;
  TapedModel bound = bind_model(tape, model);
  NodeId out = bound.logits(tape.leaf(batch));
  return tape.value(out);
}

Tensor input_gradient_batch(const ModelState& model, const Tensor& batch,
                            std::span<const int> labels, double temperature) {
  Tape tape;
  TapedModel bound = bind_model(tape, model);
  NodeId x = tape.leaf(batch);
  NodeId logits = bound.logits(x);
  NodeId probs = tape.softmax_t(logits, temperature);
  NodeId loss = tape.cross_entropy(probs, labels, Reduction::kSum);
  tape.backward(loss);
  return tape.grad(x);
}

Tensor input_gradient(const ModelState& model, const Tensor& x, int y_true, double temperature) {
  std::vector<int> batch_shape = x.shape();
  batch_shape.insert(batch_shape.begin(), 1);
  const int labels[] = {y_true};
  Tensor g = input_gradient_batch(model, x.reshaped(batch_shape), labels, temperature);
  return g.reshaped(x.shape());
}

std::vector<std::pair<std::string, ModelSpec>> reference_specs(std::vector<int> input_shape,
                                                               int class_count) {
  std::vector<std::pair<std::string, ModelSpec>> specs;
  specs.emplace_back("teacher-cnn",
                     ModelSpec{input_shape,
                               {ConvLayer{8, 3, 2}, ReluLayer{}, ConvLayer{16, 3, 1}, ReluLayer{},
                                FlattenLayer{}, DenseLayer{80}, ReluLayer{}, DenseLayer{class_count}},
                               class_count});
  specs.emplace_back("student-cnn",
                     ModelSpec{input_shape,
                               {ConvLayer{6, 3, 2}, ReluLayer{}, FlattenLayer{}, DenseLayer{48},
                                ReluLayer{}, DenseLayer{class_count}},
                               class_count});
  specs.emplace_back("mlp", ModelSpec{input_shape,
                                      {FlattenLayer{}, DenseLayer{32}, ReluLayer{}, DenseLayer{class_count}},
                                      class_count});
  return specs;
}

ModelSpec reference_spec(const std::string& name, std::vector<int> input_shape, int class_count) {
  for (auto& [n, spec] : reference_specs(std::move(input_shape), class_count)) {
    if (n == name) return spec;
  }
  throw std::invalid_argument("unknown reference spec '" + name +
                              "'; known: teacher-cnn, student-cnn, mlp");
}

}  // namespace advw
