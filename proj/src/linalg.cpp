#include "stoptime/linalg.hpp"

#include <utility>

#include "stoptime/errors.hpp"

namespace stoptime {

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1;
  return m;
}

Mat mat_mul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) throw IndexError("matrix dimension mismatch");
  Mat r(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const Rat& aik = a.at(i, k);
      if (aik == 0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j)
        r.at(i, j) += aik * b.at(k, j);
    }
  return r;
}

Vec vec_mat(const Vec& v, const Mat& m) {
  if (v.size() != m.rows()) throw IndexError("vector/matrix size mismatch");
  Vec r(m.cols(), Rat(0));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == 0) continue;
    for (std::size_t j = 0; j < m.cols(); ++j) r[j] += v[i] * m.at(i, j);
  }
  return r;
}

Vec mat_vec(const Mat& m, const Vec& v) {
  if (v.size() != m.cols()) throw IndexError("matrix/vector size mismatch");
  Vec r(m.rows(), Rat(0));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (m.at(i, j) != 0) r[i] += m.at(i, j) * v[j];
  return r;
}

Rat dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw IndexError("vector size mismatch");
  Rat r(0);
  for (std::size_t i = 0; i < a.size(); ++i) r += a[i] * b[i];
  return r;
}

Mat mat_pow(const Mat& m, unsigned long e) {
  if (m.rows() != m.cols()) throw IndexError("power of non-square matrix");
  Mat result = Mat::identity(m.rows());
  Mat base = m;
  while (e > 0) {
    if (e & 1UL) result = mat_mul(result, base);
    e >>= 1UL;
    if (e > 0) base = mat_mul(base, base);
  }
  return result;
}

Mat solve_linear(const Mat& a, const Mat& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows())
    throw IndexError("solve dimension mismatch");
  const std::size_t n = a.rows();
  const std::size_t w = n + b.cols();

  // Integer augmented matrix: each row scaled by the lcm of its
  // denominators. Row scaling leaves the solution of A X = B unchanged.
  std::vector<std::vector<Int>> m(n, std::vector<Int>(w));
  for (std::size_t i = 0; i < n; ++i) {
    Int l = 1;
    for (std::size_t j = 0; j < n; ++j)
      mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), a.at(i, j).get_den().get_mpz_t());
    for (std::size_t j = 0; j < b.cols(); ++j)
      mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), b.at(i, j).get_den().get_mpz_t());
    for (std::size_t j = 0; j < n; ++j) {
      Rat v = a.at(i, j) * l;
      m[i][j] = v.get_num();
    }
    for (std::size_t j = 0; j < b.cols(); ++j) {
      Rat v = b.at(i, j) * l;
      m[i][n + j] = v.get_num();
    }
  }

  // Bareiss elimination: every division below is exact by construction.
  Int prev = 1;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    while (pivot < n && m[pivot][k] == 0) ++pivot;
    if (pivot == n) throw SingularSystem("singular system in exact solve");
    if (pivot != k) std::swap(m[pivot], m[k]);
    for (std::size_t i = k + 1; i < n; ++i) {
      for (std::size_t j = k + 1; j < w; ++j) {
        Int t = m[i][j] * m[k][k] - m[i][k] * m[k][j];
        mpz_divexact(m[i][j].get_mpz_t(), t.get_mpz_t(), prev.get_mpz_t());
      }
      m[i][k] = 0;
    }
    prev = m[k][k];
  }

  Mat x(n, b.cols());
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = n; i-- > 0;) {
      Rat acc(m[i][n + c]);
      for (std::size_t j = i + 1; j < n; ++j)
        acc -= Rat(m[i][j]) * x.at(j, c);
      x.at(i, c) = acc / Rat(m[i][i]);
    }
  }
  return x;
}

Vec solve_linear_vec(const Mat& a, const Vec& b) {
  Mat bb(b.size(), 1);
  for (std::size_t i = 0; i < b.size(); ++i) bb.at(i, 0) = b[i];
  Mat x = solve_linear(a, bb);
  Vec r(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) r[i] = x.at(i, 0);
  return r;
}

}  // namespace stoptime
