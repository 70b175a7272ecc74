#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace advw {

// Dense n-dimensional array of doubles in row-major order. Rank-0 tensors
// (empty shape, one element) represent scalars. Tensors are plain values;
// copies are deep and instances are safe to share across threads once built.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::size_t size() const { return data_.size(); }
  int dim(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-2 element access (row, col).
  double& at2(int r, int c) { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }
  double at2(int r, int c) const { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  double value() const;  // requires size() == 1

  Tensor reshaped(std::vector<int> shape) const;

  static std::size_t element_count(const std::vector<int>& shape);
  static std::string shape_string(const std::vector<int>& shape);

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// sign(0) = 0, so zero-gradient pixels stay untouched by FGSM.
inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace advw
