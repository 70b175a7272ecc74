#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "advw/data.hpp"
#include "advw/model.hpp"
#include "advw/ops.hpp"

namespace testutil {

// Relative error with a small absolute floor so near-zero pairs compare sanely.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

// Loss used by the gradient checks: cross_entropy(softmax_T(logits), y) summed
// over the batch, evaluated through the forward-only path.
inline double forward_loss(const advw::ModelState& model, const advw::Tensor& batch,
                           const std::vector<int>& labels, double temperature) {
  const advw::Tensor logits = advw::forward_logits(model, batch);
  const int classes = logits.dim(1);
  double total = 0.0;
  for (int r = 0; r < logits.dim(0); ++r) {
    std::vector<double> row(static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c) row[static_cast<std::size_t>(c)] = logits.at2(r, c);
    const advw::Tensor probs = advw::softmax_with_temperature(
        advw::Tensor({classes}, std::move(row)), temperature);
    total += advw::cross_entropy(probs, labels[static_cast<std::size_t>(r)]);
  }
  return total;
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  int checked = 0;
};

// Central finite differences (step h) over every parameter element and every
// input element against the tape gradients.
inline GradCheckResult check_gradients(const advw::ModelState& model, const advw::Tensor& batch,
                                       const std::vector<int>& labels, double temperature,
                                       double h = 1e-5) {
  advw::Tape tape;
  advw::TapedModel bound = advw::bind_model(tape, model);
  advw::NodeId x = tape.leaf(batch);
  advw::NodeId logits = bound.logits(x);
  advw::NodeId probs = tape.softmax_t(logits, temperature);
  advw::NodeId loss = tape.cross_entropy(probs, labels, advw::Reduction::kSum);
  tape.backward(loss);

  GradCheckResult result;
  const auto update = [&result](double analytic, double fd) {
    result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic, fd));
    ++result.checked;
  };

  for (std::size_t pi = 0; pi < model.params.size(); ++pi) {
    const advw::Tensor& analytic = tape.grad(bound.params[pi]);
    for (std::size_t e = 0; e < analytic.size(); ++e) {
      advw::ModelState probe = model;
      probe.params[pi].value[e] += h;
      const double up = forward_loss(probe, batch, labels, temperature);
      probe.params[pi].value[e] -= 2.0 * h;
      const double down = forward_loss(probe, batch, labels, temperature);
      update(analytic[e], (up - down) / (2.0 * h));
    }
  }

  const advw::Tensor& dx = tape.grad(x);
  for (std::size_t e = 0; e < dx.size(); ++e) {
    advw::Tensor probe = batch;
    probe[e] += h;
    const double up = forward_loss(model, probe, labels, temperature);
    probe[e] -= 2.0 * h;
    const double down = forward_loss(model, probe, labels, temperature);
    update(dx[e], (up - down) / (2.0 * h));
  }
  return result;
}

// Minimal IDX writer used to exercise the loader; mirrors the byte layout of
// the public file format (big-endian u32 header fields, raw bytes after).
inline void write_u32_be(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>((v >> 24) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>(v & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void save_idx(const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path,
                     const std::vector<std::vector<unsigned char>>& images,
                     const std::vector<unsigned char>& labels, int rows, int cols,
                     std::uint32_t image_magic = 0x00000803u,
                     std::uint32_t label_magic = 0x00000801u) {
  std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
  write_u32_be(img, image_magic);
  write_u32_be(img, static_cast<std::uint32_t>(images.size()));
  write_u32_be(img, static_cast<std::uint32_t>(rows));
  write_u32_be(img, static_cast<std::uint32_t>(cols));
  for (const auto& image : images) {
    img.write(reinterpret_cast<const char*>(image.data()),
              static_cast<std::streamsize>(image.size()));
  }
  std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
  write_u32_be(lab, label_magic);
  write_u32_be(lab, static_cast<std::uint32_t>(labels.size()));
  lab.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

// Scratch directory for file-writing tests.
inline std::filesystem::path temp_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("advw-tests-" + tag);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<double> random_simplex(std::mt19937_64& gen, int k) {
  std::exponential_distribution<double> exp_dist(1.0);
  std::vector<double> p(static_cast<std::size_t>(k));
  double total = 0.0;
  for (double& v : p) {
    v = exp_dist(gen) + 1e-9;
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

}  // namespace testutil
