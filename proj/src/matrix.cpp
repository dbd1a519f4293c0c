#include "mml/matrix.hpp"

namespace mml {

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_shape(a.cols() == b.rows(), "matmul inner dims " + std::to_string(a.cols()) +
                                        " vs " + std::to_string(b.rows()));
  Matrix out(a.rows(), b.cols());
  const std::size_t k = a.cols(), c = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.row(i);
    double* or_ = out.row(i);
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = ar[kk];
      if (av == 0.0) continue;
      const double* br = b.row(kk);
      for (std::size_t j = 0; j < c; ++j) or_[j] += av * br[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_shape(a.cols() == b.cols(), "matmul_nt inner dims " + std::to_string(a.cols()) +
                                        " vs " + std::to_string(b.cols()));
  Matrix out(a.rows(), b.rows());
  const std::size_t k = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.row(i);
    double* or_ = out.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* br = b.row(j);
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += ar[kk] * br[kk];
      or_[j] = acc;
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check_shape(a.rows() == b.rows(), "matmul_tn inner dims " + std::to_string(a.rows()) +
                                        " vs " + std::to_string(b.rows()));
  Matrix out(a.cols(), b.cols());
  const std::size_t c = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.row(i);
    const double* br = b.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double av = ar[j];
      if (av == 0.0) continue;
      double* or_ = out.row(j);
      for (std::size_t kk = 0; kk < c; ++kk) or_[kk] += av * br[kk];
    }
  }
  return out;
}

}  // namespace mml
