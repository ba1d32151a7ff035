#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace d2rl {

// Dense row-major real tensor. Networks only ever see rank 1 or 2
// (a single vector, or a batch of row vectors).
class RealTensor {
 public:
  RealTensor() = default;
  explicit RealTensor(std::vector<std::size_t> shape, double fill = 0.0);
  RealTensor(std::vector<std::size_t> shape, std::vector<double> data);

  static RealTensor vector(std::vector<double> values);
  static RealTensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }

  // Batch view: rank-1 tensors count as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const;
  void fill(double value);

  // Column-wise concatenation of equally tall batches.
  static RealTensor hconcat(std::initializer_list<const RealTensor*> parts);
  // Columns [begin, begin + count) of a batch.
  RealTensor columns(std::size_t begin, std::size_t count) const;
  // Rows at the given indices.
  RealTensor gather_rows(std::span<const std::size_t> indices) const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

}  // namespace d2rl
