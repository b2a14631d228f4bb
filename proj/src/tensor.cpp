#include "pullback/tensor.hpp"

#include "pullback/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace pullback {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::shape_mismatch: return "shape_mismatch";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::io: return "io";
    case ErrorKind::schema: return "schema";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
  }
  return "unknown";
}

namespace ad {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, data_(rows * cols, fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(shape_.size() <= 2, ErrorKind::shape_mismatch, "tensor rank above 2 is not supported");
  const std::size_t n =
      std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  require(n == data_.size(), ErrorKind::shape_mismatch,
          "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
              shape_string());
}

Tensor Tensor::scalar(double value) { return Tensor(1, 1, value); }

Tensor Tensor::row(std::initializer_list<double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values));
}

Tensor Tensor::from_rows(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::from_matrix(const RowMatrix& m) {
  Tensor t(std::size_t(m.rows()), std::size_t(m.cols()));
  std::copy(m.data(), m.data() + m.size(), t.data_.begin());
  return t;
}

double Tensor::item() const {
  require(data_.size() == 1, ErrorKind::shape_mismatch,
          "item() on tensor of shape " + shape_string());
  return data_[0];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool Tensor::same_shape(const Tensor& other) const noexcept {
  return rows() == other.rows() && cols() == other.cols();
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

}  // namespace ad
}  // namespace pullback
