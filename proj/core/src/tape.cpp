#include "advw/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace advw {

namespace {

Tensor reduce_scalar(double v) { return Tensor::scalar(v); }

}  // namespace

NodeId Tape::push(TapeNode n) {
  for (NodeId p : n.parents) {
    if (p.index < 0 || p.index >= static_cast<int>(nodes_.size())) {
      throw std::invalid_argument("Tape: parent node " + std::to_string(p.index) +
                                  " does not precede the new node");
    }
  }
  n.grad = Tensor::zeros(n.value.shape());
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<int>(nodes_.size()) - 1};
}

const TapeNode& Tape::node(NodeId id) const {
  if (id.index < 0 || id.index >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("Tape: invalid node id " + std::to_string(id.index));
  }
  return nodes_[static_cast<std::size_t>(id.index)];
}

TapeNode& Tape::node(NodeId id) {
  return const_cast<TapeNode&>(static_cast<const Tape*>(this)->node(id));
}

NodeId Tape::leaf(Tensor value) {
  TapeNode n;
  n.op = OpKind::kLeaf;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  TapeNode n;
  n.op = OpKind::kMatMul;
  n.parents = {a, b};
  n.value = advw::matmul(value(a), value(b));
  return push(std::move(n));
}

NodeId Tape::conv2d(NodeId input, NodeId kernels, NodeId bias, int stride) {
  TapeNode n;
  n.op = OpKind::kConv2d;
  n.parents = {input, kernels, bias};
  n.int_args = {stride};
  n.value = advw::conv2d(value(input), value(kernels), value(bias), stride);
  return push(std::move(n));
}

NodeId Tape::relu(NodeId x) {
  TapeNode n;
  n.op = OpKind::kRelu;
  n.parents = {x};
  n.value = advw::relu(value(x));
  return push(std::move(n));
}

NodeId Tape::softmax_t(NodeId logits, double temperature) {
  TapeNode n;
  n.op = OpKind::kSoftmaxT;
  n.parents = {logits};
  n.real_args = {temperature};
  n.value = advw::softmax_with_temperature(value(logits), temperature);
  return push(std::move(n));
}

NodeId Tape::cross_entropy(NodeId probs, int true_class) {
  const int one[] = {true_class};
  return cross_entropy(probs, one, Reduction::kSum);
}

NodeId Tape::cross_entropy(NodeId probs, std::span<const int> labels, Reduction reduction) {
  const Tensor& p = value(probs);
  const int rows = p.rank() == 2 ? p.dim(0) : 1;
  const int classes = p.dim(p.rank() - 1);
  if (p.rank() != 1 && p.rank() != 2) {
    throw std::invalid_argument("cross_entropy: expects [K] or [B x K], got " +
                                Tensor::shape_string(p.shape()));
  }
  if (static_cast<int>(labels.size()) != rows) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(rows) + " rows");
  }
  double acc = 0.0;
  for (int r = 0; r < rows; ++r) {
    const int label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= classes) {
      throw std::invalid_argument("cross_entropy: class index " + std::to_string(label) +
                                  " out of range [0, " + std::to_string(classes) + ")");
    }
    const double pt = p[static_cast<std::size_t>(r) * classes + label];
    acc += -std::log(pt < kProbFloor ? kProbFloor : pt);
  }
  if (reduction == Reduction::kMean) acc /= rows;

  TapeNode n;
  n.op = OpKind::kCrossEntropy;
  n.parents = {probs};
  n.int_args.push_back(reduction == Reduction::kMean ? 1 : 0);
  n.int_args.insert(n.int_args.end(), labels.begin(), labels.end());
  n.value = reduce_scalar(acc);
  return push(std::move(n));
}

NodeId Tape::kl_divergence(NodeId p, NodeId q, Reduction reduction) {
  const Tensor& pv = value(p);
  const Tensor& qv = value(q);
  if (!pv.same_shape(qv) || (pv.rank() != 1 && pv.rank() != 2)) {
    throw std::invalid_argument("kl_divergence: length mismatch, " +
                                Tensor::shape_string(pv.shape()) + " vs " +
                                Tensor::shape_string(qv.shape()));
  }
  const int rows = pv.rank() == 2 ? pv.dim(0) : 1;
  const int classes = pv.dim(pv.rank() - 1);
  double acc = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int i = 0; i < classes; ++i) {
      const std::size_t at = static_cast<std::size_t>(r) * classes + i;
      const double pi = pv[at];
      if (pi <= 0.0) continue;
      const double qi = qv[at];
      acc += pi * (std::log(pi) - std::log(qi < kProbFloor ? kProbFloor : qi));
    }
  }
  if (reduction == Reduction::kMean) acc /= rows;

  TapeNode n;
  n.op = OpKind::kKlDiv;
  n.parents = {p, q};
  n.int_args = {reduction == Reduction::kMean ? 1 : 0};
  n.value = reduce_scalar(acc);
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) {
    throw std::invalid_argument("add: shape mismatch, " + Tensor::shape_string(av.shape()) +
                                " vs " + Tensor::shape_string(bv.shape()));
  }
  TapeNode n;
  n.op = OpKind::kAdd;
  n.parents = {a, b};
  n.value = av;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += bv[i];
  return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) {
    throw std::invalid_argument("sub: shape mismatch, " + Tensor::shape_string(av.shape()) +
                                " vs " + Tensor::shape_string(bv.shape()));
  }
  TapeNode n;
  n.op = OpKind::kSub;
  n.parents = {a, b};
  n.value = av;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] -= bv[i];
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) {
    throw std::invalid_argument("mul: shape mismatch, " + Tensor::shape_string(av.shape()) +
                                " vs " + Tensor::shape_string(bv.shape()));
  }
  TapeNode n;
  n.op = OpKind::kMul;
  n.parents = {a, b};
  n.value = av;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= bv[i];
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double factor) {
  TapeNode n;
  n.op = OpKind::kScale;
  n.parents = {a};
  n.real_args = {factor};
  n.value = value(a);
  for (double& v : n.value.data()) v *= factor;
  return push(std::move(n));
}

NodeId Tape::add_scalar(NodeId a, double constant) {
  TapeNode n;
  n.op = OpKind::kAddScalar;
  n.parents = {a};
  n.real_args = {constant};
  n.value = value(a);
  for (double& v : n.value.data()) v += constant;
  return push(std::move(n));
}

NodeId Tape::add_row_bias(NodeId matrix, NodeId bias) {
  const Tensor& m = value(matrix);
  const Tensor& b = value(bias);
  if (m.rank() != 2 || b.rank() != 1 || m.dim(1) != b.dim(0)) {
    throw std::invalid_argument("add_row_bias: expects [B x N] and [N], got " +
                                Tensor::shape_string(m.shape()) + " and " +
                                Tensor::shape_string(b.shape()));
  }
  TapeNode n;
  n.op = OpKind::kAddRowBias;
  n.parents = {matrix, bias};
  n.value = m;
  for (int r = 0; r < m.dim(0); ++r) {
    for (int c = 0; c < m.dim(1); ++c) n.value.at2(r, c) += b[static_cast<std::size_t>(c)];
  }
  return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
  double acc = 0.0;
  for (double v : value(a).data()) acc += v;
  TapeNode n;
  n.op = OpKind::kSum;
  n.parents = {a};
  n.value = reduce_scalar(acc);
  return push(std::move(n));
}

NodeId Tape::reshape(NodeId a, std::vector<int> shape) {
  TapeNode n;
  n.op = OpKind::kReshape;
  n.parents = {a};
  n.value = value(a).reshaped(std::move(shape));
  return push(std::move(n));
}

NodeId Tape::pick(NodeId a, int flat_index) {
  const Tensor& av = value(a);
  if (flat_index < 0 || static_cast<std::size_t>(flat_index) >= av.size()) {
    throw std::invalid_argument("pick: index " + std::to_string(flat_index) +
                                " out of range for " + std::to_string(av.size()) + " elements");
  }
  TapeNode n;
  n.op = OpKind::kPick;
  n.parents = {a};
  n.int_args = {flat_index};
  n.value = reduce_scalar(av[static_cast<std::size_t>(flat_index)]);
  return push(std::move(n));
}

void Tape::backward(NodeId loss) {
  const TapeNode& root = node(loss);
  if (root.value.size() != 1) {
    throw std::invalid_argument("backward: loss node must be scalar, got shape " +
                                Tensor::shape_string(root.value.shape()));
  }
  for (TapeNode& n : nodes_) {
    for (double& g : n.grad.data()) g = 0.0;
  }
  node(loss).grad[0] = 1.0;
  for (int i = loss.index; i >= 0; --i) {
    const TapeNode& n = nodes_[static_cast<std::size_t>(i)];
    if (n.op == OpKind::kLeaf) continue;
    backward_into_parents(n);
  }
}

void Tape::backward_into_parents(const TapeNode& n) {
  const Tensor& gout = n.grad;
  switch (n.op) {
    case OpKind::kLeaf:
      break;
    case OpKind::kMatMul: {
      const Tensor& a = node(n.parents[0]).value;
      const Tensor& b = node(n.parents[1]).value;
      Tensor& ga = node(n.parents[0]).grad;
      Tensor& gb = node(n.parents[1]).grad;
      const int m = a.dim(0), k = a.dim(1), cols = b.dim(1);
      // dA = dC * B^T, dB = A^T * dC
      for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
          double acc = 0.0;
          for (int j = 0; j < cols; ++j) acc += gout.at2(i, j) * b.at2(p, j);
          ga.at2(i, p) += acc;
        }
      }
      for (int p = 0; p < k; ++p) {
        for (int j = 0; j < cols; ++j) {
          double acc = 0.0;
          for (int i = 0; i < m; ++i) acc += a.at2(i, p) * gout.at2(i, j);
          gb.at2(p, j) += acc;
        }
      }
      break;
    }
    case OpKind::kConv2d: {
      const Tensor& input = node(n.parents[0]).value;
      const Tensor& kernels = node(n.parents[1]).value;
      const Tensor& bias = node(n.parents[2]).value;
      Tensor& gin = node(n.parents[0]).grad;
      Tensor& gker = node(n.parents[1]).grad;
      Tensor& gbias = node(n.parents[2]).grad;
      const auto d = detail::conv_dims(input, kernels, bias, n.int_args[0]);
      const auto in = input.data();
      const auto ker = kernels.data();
      const auto go = gout.data();
      auto gi = gin.data();
      auto gk = gker.data();
      const std::size_t in_img = static_cast<std::size_t>(d.in_channels) * d.height * d.width;
      const std::size_t out_img =
          static_cast<std::size_t>(d.out_channels) * d.out_height * d.out_width;
      for (int b = 0; b < d.batch; ++b) {
        for (int f = 0; f < d.out_channels; ++f) {
          for (int oy = 0; oy < d.out_height; ++oy) {
            for (int ox = 0; ox < d.out_width; ++ox) {
              const double g =
                  go[b * out_img + (static_cast<std::size_t>(f) * d.out_height + oy) * d.out_width + ox];
              if (g == 0.0) continue;
              gbias[static_cast<std::size_t>(f)] += g;
              const int iy0 = oy * d.stride, ix0 = ox * d.stride;
              for (int c = 0; c < d.in_channels; ++c) {
                const std::size_t in_base =
                    b * in_img + (static_cast<std::size_t>(c) * d.height + iy0) * d.width + ix0;
                const std::size_t k_base =
                    ((static_cast<std::size_t>(f) * d.in_channels + c) * d.kernel) * d.kernel;
                for (int ky = 0; ky < d.kernel; ++ky) {
                  const std::size_t in_row = in_base + static_cast<std::size_t>(ky) * d.width;
                  const std::size_t k_row = k_base + static_cast<std::size_t>(ky) * d.kernel;
                  for (int kx = 0; kx < d.kernel; ++kx) {
                    gi[in_row + kx] += g * ker[k_row + kx];
                    gk[k_row + kx] += g * in[in_row + kx];
                  }
                }
              }
            }
          }
        }
      }
      break;
    }
    case OpKind::kRelu: {
      const Tensor& x = node(n.parents[0]).value;
      Tensor& gx = node(n.parents[0]).grad;
      // subgradient at exactly 0 is 0
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0) gx[i] += gout[i];
      }
      break;
    }
    case OpKind::kSoftmaxT: {
      const Tensor& p = n.value;
      Tensor& gz = node(n.parents[0]).grad;
      const double temperature = n.real_args[0];
      const int classes = p.dim(p.rank() - 1);
      const int rows = p.rank() == 2 ? p.dim(0) : 1;
      for (int r = 0; r < rows; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * classes;
        double dot = 0.0;
        for (int i = 0; i < classes; ++i) dot += gout[base + i] * p[base + i];
        for (int i = 0; i < classes; ++i) {
          gz[base + i] += p[base + i] * (gout[base + i] - dot) / temperature;
        }
      }
      break;
    }
    case OpKind::kCrossEntropy: {
      const Tensor& p = node(n.parents[0]).value;
      Tensor& gp = node(n.parents[0]).grad;
      const bool mean = n.int_args[0] == 1;
      const int rows = p.rank() == 2 ? p.dim(0) : 1;
      const int classes = p.dim(p.rank() - 1);
      const double g = gout[0] * (mean ? 1.0 / rows : 1.0);
      for (int r = 0; r < rows; ++r) {
        const int label = n.int_args[static_cast<std::size_t>(r) + 1];
        const std::size_t at = static_cast<std::size_t>(r) * classes + label;
        if (p[at] >= kProbFloor) gp[at] += -g / p[at];
        // below the floor the clamp is active and the local derivative is 0
      }
      break;
    }
    case OpKind::kKlDiv: {
      const Tensor& p = node(n.parents[0]).value;
      const Tensor& q = node(n.parents[1]).value;
      Tensor& gp = node(n.parents[0]).grad;
      Tensor& gq = node(n.parents[1]).grad;
      const bool mean = n.int_args[0] == 1;
      const int rows = p.rank() == 2 ? p.dim(0) : 1;
      const int classes = p.dim(p.rank() - 1);
      const double g = gout[0] * (mean ? 1.0 / rows : 1.0);
      for (int r = 0; r < rows; ++r) {
        for (int i = 0; i < classes; ++i) {
          const std::size_t at = static_cast<std::size_t>(r) * classes + i;
          if (p[at] <= 0.0) continue;
          const double qc = q[at] < kProbFloor ? kProbFloor : q[at];
          gp[at] += g * (std::log(p[at]) - std::log(qc) + 1.0);
          if (q[at] >= kProbFloor) gq[at] += -g * p[at] / qc;
        }
      }
      break;
    }
    case OpKind::kAdd: {
      Tensor& ga = node(n.parents[0]).grad;
      Tensor& gb = node(n.parents[1]).grad;
      for (std::size_t i = 0; i < gout.size(); ++i) {
        ga[i] += gout[i];
        gb[i] += gout[i];
      }
      break;
    }
    case OpKind::kSub: {
      Tensor& ga = node(n.parents[0]).grad;
      Tensor& gb = node(n.parents[1]).grad;
      for (std::size_t i = 0; i < gout.size(); ++i) {
        ga[i] += gout[i];
        gb[i] -= gout[i];
      }
      break;
    }
    case OpKind::kMul: {
      const Tensor& a = node(n.parents[0]).value;
      const Tensor& b = node(n.parents[1]).value;
      Tensor& ga = node(n.parents[0]).grad;
      Tensor& gb = node(n.parents[1]).grad;
      for (std::size_t i = 0; i < gout.size(); ++i) {
        ga[i] += gout[i] * b[i];
        gb[i] += gout[i] * a[i];
      }
      break;
    }
    case OpKind::kScale: {
      Tensor& ga = node(n.parents[0]).grad;
      const double f = n.real_args[0];
      for (std::size_t i = 0; i < gout.size(); ++i) ga[i] += gout[i] * f;
      break;
    }
    case OpKind::kAddScalar: {
      Tensor& ga = node(n.parents[0]).grad;
      for (std::size_t i = 0; i < gout.size(); ++i) ga[i] += gout[i];
      break;
    }
    case OpKind::kAddRowBias: {
      Tensor& gm = node(n.parents[0]).grad;
      Tensor& gb = node(n.parents[1]).grad;
      const int rows = gout.dim(0), cols = gout.dim(1);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          gm.at2(r, c) += gout.at2(r, c);
          gb[static_cast<std::size_t>(c)] += gout.at2(r, c);
        }
      }
      break;
    }
    case OpKind::kSum: {
      Tensor& ga = node(n.parents[0]).grad;
      const double g = gout[0];
      for (double& v : ga.data()) v += g;
      break;
    }
    case OpKind::kReshape: {
      Tensor& ga = node(n.parents[0]).grad;
      for (std::size_t i = 0; i < gout.size(); ++i) ga[i] += gout[i];
      break;
    }
    case OpKind::kPick: {
      Tensor& ga = node(n.parents[0]).grad;
      ga[static_cast<std::size_t>(n.int_args[0])] += gout[0];
      break;
    }
  }
}

}  // namespace advw
