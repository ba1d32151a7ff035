#include "d2rl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "d2rl/errors.hpp"

namespace d2rl {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

}  // namespace

RealTensor::RealTensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

RealTensor::RealTensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != data_.size()) {
    throw ShapeError("tensor data length does not match shape");
  }
}

RealTensor RealTensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return RealTensor({n}, std::move(values));
}

RealTensor RealTensor::matrix(std::size_t rows, std::size_t cols, double fill) {
  return RealTensor({rows, cols}, fill);
}

std::size_t RealTensor::rows() const {
  if (shape_.empty()) return 0;
  return shape_.size() == 1 ? 1 : shape_[0];
}

std::size_t RealTensor::cols() const {
  if (shape_.empty()) return 0;
  return shape_.back();
}

bool RealTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void RealTensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

RealTensor RealTensor::hconcat(std::initializer_list<const RealTensor*> parts) {
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool first = true;
  for (const RealTensor* p : parts) {
    if (p->size() == 0 && p->cols() == 0) continue;
    if (first) {
      rows = p->rows();
      first = false;
    } else if (p->rows() != rows) {
      throw ShapeError("hconcat: row counts differ");
    }
    cols += p->cols();
  }
  RealTensor out = RealTensor::matrix(rows, cols);
  std::size_t offset = 0;
  for (const RealTensor* p : parts) {
    if (p->cols() == 0) continue;
    for (std::size_t r = 0; r < rows; ++r) {
      auto src = p->row(r);
      std::copy(src.begin(), src.end(), out.row(r).begin() + offset);
    }
    offset += p->cols();
  }
  return out;
}

RealTensor RealTensor::columns(std::size_t begin, std::size_t count) const {
  if (begin + count > cols()) throw ShapeError("columns: range out of bounds");
  RealTensor out = RealTensor::matrix(rows(), count);
  for (std::size_t r = 0; r < rows(); ++r) {
    auto src = row(r).subspan(begin, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

RealTensor RealTensor::gather_rows(std::span<const std::size_t> indices) const {
  RealTensor out = RealTensor::matrix(indices.size(), cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows()) throw ShapeError("gather_rows: index out of range");
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace d2rl
