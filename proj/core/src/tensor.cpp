#include "advw/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace advw {

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (int d : shape_) {
    if (d <= 0) {
      throw std::invalid_argument("Tensor: shape dimensions must be positive, got " +
                                  shape_string(shape_));
    }
  }
  if (element_count(shape_) != data_.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_string(shape_) + " expects " +
                                std::to_string(element_count(shape_)) + " elements, got " +
                                std::to_string(data_.size()));
  }
}

Tensor Tensor::zeros(std::vector<int> shape) {
  std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::value() const {
  if (data_.size() != 1) {
    throw std::invalid_argument("Tensor::value: tensor with " + std::to_string(data_.size()) +
                                " elements is not a scalar");
  }
  return data_[0];
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
  if (element_count(shape) != data_.size()) {
    throw std::invalid_argument("Tensor::reshaped: cannot view " + shape_string(shape_) + " as " +
                                shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

std::size_t Tensor::element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d > 0 ? d : 0);
  return n;
}

std::string Tensor::shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace advw
