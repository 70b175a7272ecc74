#include "advw/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace advw {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument("matmul: expects rank-2 tensors, got " +
                                Tensor::shape_string(a.shape()) + " and " +
                                Tensor::shape_string(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: inner dimensions disagree, " +
                                Tensor::shape_string(a.shape()) + " vs " +
                                Tensor::shape_string(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = a.at2(i, p);
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j) out.at2(i, j) += av * b.at2(p, j);
    }
  }
  return out;
}

namespace detail {

ConvDims conv_dims(const Tensor& input, const Tensor& kernels, const Tensor& bias, int stride) {
  if (input.rank() != 3 && input.rank() != 4) {
    throw std::invalid_argument("conv2d: input must be [C x H x W] or [B x C x H x W], got " +
                                Tensor::shape_string(input.shape()));
  }
  if (kernels.rank() != 4) {
    throw std::invalid_argument("conv2d: kernels must be [F x C x k x k], got " +
                                Tensor::shape_string(kernels.shape()));
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be positive");
  ConvDims d;
  d.batched = input.rank() == 4;
  d.batch = d.batched ? input.dim(0) : 1;
  d.in_channels = input.dim(d.batched ? 1 : 0);
  d.height = input.dim(d.batched ? 2 : 1);
  d.width = input.dim(d.batched ? 3 : 2);
  d.out_channels = kernels.dim(0);
  d.kernel = kernels.dim(2);
  d.stride = stride;
  if (kernels.dim(1) != d.in_channels) {
    throw std::invalid_argument("conv2d: kernel channel count " + std::to_string(kernels.dim(1)) +
                                " does not match input channels " + std::to_string(d.in_channels));
  }
  if (kernels.dim(3) != d.kernel) {
    throw std::invalid_argument("conv2d: kernels must be square, got " +
                                Tensor::shape_string(kernels.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != d.out_channels) {
    throw std::invalid_argument("conv2d: bias must be [F], got " +
                                Tensor::shape_string(bias.shape()));
  }
  if (d.kernel > d.height || d.kernel > d.width) {
    throw std::invalid_argument("conv2d: kernel size " + std::to_string(d.kernel) +
                                " exceeds input " + std::to_string(d.height) + "x" +
                                std::to_string(d.width));
  }
  d.out_height = (d.height - d.kernel) / d.stride + 1;
  d.out_width = (d.width - d.kernel) / d.stride + 1;
  return d;
}

}  // namespace detail

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, int stride) {
  const auto d = detail::conv_dims(input, kernels, bias, stride);
  std::vector<int> out_shape = d.batched
                                   ? std::vector<int>{d.batch, d.out_channels, d.out_height, d.out_width}
                                   : std::vector<int>{d.out_channels, d.out_height, d.out_width};
  Tensor out = Tensor::zeros(std::move(out_shape));
  const auto in = input.data();
  const auto ker = kernels.data();
  auto o = out.data();
  const std::size_t in_img = static_cast<std::size_t>(d.in_channels) * d.height * d.width;
  const std::size_t out_img = static_cast<std::size_t>(d.out_channels) * d.out_height * d.out_width;
  for (int b = 0; b < d.batch; ++b) {
    for (int f = 0; f < d.out_channels; ++f) {
      for (int oy = 0; oy < d.out_height; ++oy) {
        for (int ox = 0; ox < d.out_width; ++ox) {
          double acc = bias[static_cast<std::size_t>(f)];
          const int iy0 = oy * d.stride, ix0 = ox * d.stride;
          for (int c = 0; c < d.in_channels; ++c) {
            const std::size_t in_base = b * in_img + (static_cast<std::size_t>(c) * d.height + iy0) * d.width + ix0;
            const std::size_t k_base = ((static_cast<std::size_t>(f) * d.in_channels + c) * d.kernel) * d.kernel;
            for (int ky = 0; ky < d.kernel; ++ky) {
              const std::size_t in_row = in_base + static_cast<std::size_t>(ky) * d.width;
              const std::size_t k_row = k_base + static_cast<std::size_t>(ky) * d.kernel;
              for (int kx = 0; kx < d.kernel; ++kx) acc += in[in_row + kx] * ker[k_row + kx];
            }
          }
          o[b * out_img + (static_cast<std::size_t>(f) * d.out_height + oy) * d.out_width + ox] = acc;
        }
      }
    }
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor softmax_with_temperature(const Tensor& logits, double temperature) {
  if (temperature <= 0.0) {
    throw std::invalid_argument("softmax_with_temperature: temperature must be positive, got " +
                                std::to_string(temperature));
  }
  if (logits.rank() != 1 && logits.rank() != 2) {
    throw std::invalid_argument("softmax_with_temperature: expects [K] or [B x K], got " +
                                Tensor::shape_string(logits.shape()));
  }
  const int classes = logits.dim(logits.rank() - 1);
  if (classes < 2) {
    throw std::invalid_argument("softmax_with_temperature: needs at least 2 classes, got " +
                                std::to_string(classes));
  }
  const int rows = logits.rank() == 2 ? logits.dim(0) : 1;
  Tensor out = logits;
  auto o = out.data();
  for (int r = 0; r < rows; ++r) {
    double* row = o.data() + static_cast<std::size_t>(r) * classes;
    double mx = row[0];
    for (int i = 1; i < classes; ++i) mx = std::max(mx, row[i]);
    double sum = 0.0;
    for (int i = 0; i < classes; ++i) {
      row[i] = std::exp((row[i] - mx) / temperature);
      sum += row[i];
    }
    for (int i = 0; i < classes; ++i) row[i] /= sum;
  }
  return out;
}

double cross_entropy(const Tensor& probs, int true_class) {
  if (probs.rank() != 1) {
    throw std::invalid_argument("cross_entropy: expects a rank-1 probability vector, got " +
                                Tensor::shape_string(probs.shape()));
  }
  if (true_class < 0 || true_class >= probs.dim(0)) {
    throw std::invalid_argument("cross_entropy: class index " + std::to_string(true_class) +
                                " out of range [0, " + std::to_string(probs.dim(0)) + ")");
  }
  const double p = probs[static_cast<std::size_t>(true_class)];
  return -std::log(p < kProbFloor ? kProbFloor : p);
}

double kl_divergence(const Tensor& p, const Tensor& q) {
  if (p.rank() != 1 || q.rank() != 1 || p.dim(0) != q.dim(0)) {
    throw std::invalid_argument("kl_divergence: length mismatch, " +
                                Tensor::shape_string(p.shape()) + " vs " +
                                Tensor::shape_string(q.shape()));
  }
  double acc = 0.0;
  for (int i = 0; i < p.dim(0); ++i) {
    const double pi = p[static_cast<std::size_t>(i)];
    if (pi <= 0.0) continue;
    const double qi = q[static_cast<std::size_t>(i)];
    acc += pi * (std::log(pi) - std::log(qi < kProbFloor ? kProbFloor : qi));
  }
  return acc;
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

int argmax_excluding(std::span<const double> values, int skip) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(values.size()); ++i) {
    if (i == skip) continue;
    if (best < 0 || values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

}  // namespace advw
