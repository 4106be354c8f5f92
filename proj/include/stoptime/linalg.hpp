#pragma once

#include <cstddef>
#include <vector>

#include "stoptime/rat.hpp"

namespace stoptime {

using Vec = std::vector<Rat>;

// Dense exact matrix, row major. Sized for the small systems this project
// solves (a few dozen rows); nothing here is sparse or cache clever.
class Mat {
public:
  Mat() : rows_(0), cols_(0) {}
  Mat(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, Rat(0)) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  Rat& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const Rat& at(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  static Mat identity(std::size_t n);

  bool operator==(const Mat& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

private:
  std::size_t rows_, cols_;
  std::vector<Rat> data_;
};

Mat mat_mul(const Mat& a, const Mat& b);

// Row vector times matrix; the workhorse of every distribution update.
Vec vec_mat(const Vec& v, const Mat& m);

// Matrix times column vector.
Vec mat_vec(const Mat& m, const Vec& v);

Rat dot(const Vec& a, const Vec& b);

// Exact matrix power by binary exponentiation.
Mat mat_pow(const Mat& m, unsigned long e);

// Solves A X = B exactly for square nonsingular A. Rows of the augmented
// system are cleared to integers first, then eliminated fraction-free
// (Bareiss single-step division), so intermediate entries stay integral
// and polynomially sized. Throws SingularSystem when A has no inverse.
Mat solve_linear(const Mat& a, const Mat& b);

Vec solve_linear_vec(const Mat& a, const Vec& b);

}  // namespace stoptime
