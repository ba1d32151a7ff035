#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace d2rl {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

// Dense row-major complex matrix for channel and beamformer algebra.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  static ComplexMatrix identity(std::size_t n);
  static ComplexMatrix column(const ComplexVector& v);
  // u * v^H
  static ComplexMatrix outer(const ComplexVector& u, const ComplexVector& v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  Complex& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  ComplexMatrix hermitian() const;
  ComplexMatrix& operator+=(const ComplexMatrix& other);
  ComplexMatrix& operator*=(Complex scale);

  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Complex> data_;
};

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexVector matvec(const ComplexMatrix& a, const ComplexVector& x);

// x^H y
Complex inner(const ComplexVector& x, const ComplexVector& y);
double squared_norm(const ComplexVector& x);

// w^H M w. For Hermitian M the imaginary part is rounding noise; it is
// checked against a tolerance and dropped.
double quadratic_form(const ComplexVector& w, const ComplexMatrix& m);

}  // namespace d2rl
