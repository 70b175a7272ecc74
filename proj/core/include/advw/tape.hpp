#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "advw/ops.hpp"
#include "advw/tensor.hpp"

namespace advw {

struct NodeId {
  int index = -1;
  friend bool operator==(NodeId a, NodeId b) { return a.index == b.index; }
};

enum class OpKind : std::uint8_t {
  kLeaf,
  kMatMul,
  kConv2d,
  kRelu,
  kSoftmaxT,
  kCrossEntropy,
  kKlDiv,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddScalar,
  kAddRowBias,
  kSum,
  kReshape,
  kPick,
};

enum class Reduction : std::uint8_t { kSum, kMean };

// One recorded primitive. The node's value together with its parents' values
// is everything the backward rule needs; int_args/real_args hold op
// parameters (stride, labels, temperature, scale factors).
struct TapeNode {
  OpKind op = OpKind::kLeaf;
  std::vector<NodeId> parents;
  Tensor value;
  Tensor grad;  // same shape as value; zeros until backward accumulates into it
  std::vector<int> int_args;
  std::vector<double> real_args;
};

// Append-only reverse-mode tape. Nodes are created in topological order;
// backward() walks them in reverse and accumulates gradients for every node
// reachable from the loss. Construction and backward are single-threaded;
// independent tapes may run concurrently.
class Tape {
 public:
  NodeId leaf(Tensor value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId conv2d(NodeId input, NodeId kernels, NodeId bias, int stride);
  NodeId relu(NodeId x);
  NodeId softmax_t(NodeId logits, double temperature);
  // probs is [K] with one label, or [B x K] with B labels.
  NodeId cross_entropy(NodeId probs, int true_class);
  NodeId cross_entropy(NodeId probs, std::span<const int> labels, Reduction reduction);
  // p and q are both [K], or both [B x K] (reduced over rows).
  NodeId kl_divergence(NodeId p, NodeId q, Reduction reduction = Reduction::kMean);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId add_scalar(NodeId a, double constant);
  NodeId add_row_bias(NodeId matrix, NodeId bias);
  NodeId sum(NodeId a);
  NodeId reshape(NodeId a, std::vector<int> shape);
  NodeId pick(NodeId a, int flat_index);

  // Reverse sweep from a scalar loss. Gradients of earlier sweeps are
  // cleared first, so repeated calls on the same tape are idempotent.
  void backward(NodeId loss);

  const Tensor& value(NodeId id) const { return node(id).value; }
  const Tensor& grad(NodeId id) const { return node(id).grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  NodeId push(TapeNode node);
  const TapeNode& node(NodeId id) const;
  TapeNode& node(NodeId id);
  void backward_into_parents(const TapeNode& n);

  std::vector<TapeNode> nodes_;
};

}  // namespace advw
