#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace pullback {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace ad {

/// Dense row-major tensor of doubles. Rank 0, 1 and 2 are supported; the
/// differentiation ops view rank 0 as 1x1 and rank 1 as a single row.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor row(std::initializer_list<double> values);
  static Tensor from_rows(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor from_matrix(const RowMatrix& m);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty() && shape_.empty(); }

  std::size_t rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const noexcept {
    if (shape_.size() == 2) return shape_[1];
    return shape_.size() == 1 ? shape_[0] : 1;
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  Eigen::Map<RowMatrix> matrix() { return {data_.data(), Eigen::Index(rows()), Eigen::Index(cols())}; }
  Eigen::Map<const RowMatrix> matrix() const {
    return {data_.data(), Eigen::Index(rows()), Eigen::Index(cols())};
  }

  /// Only meaningful for tensors with exactly one element.
  double item() const;

  void fill(double value);
  bool all_finite() const noexcept;
  bool same_shape(const Tensor& other) const noexcept;

  std::string shape_string() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

}  // namespace ad
}  // namespace pullback
