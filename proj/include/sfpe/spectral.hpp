#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace sfpe {

namespace detail {

template <typename Derived>
void require_square_finite(const Eigen::MatrixBase<Derived>& a, const char* who) {
  if (a.rows() != a.cols()) throw std::domain_error(std::string(who) + ": matrix must be square");
  if (!a.allFinite()) throw std::domain_error(std::string(who) + ": non-finite entries");
}

}  // namespace detail

/// min_{||t||=1} ||A^T t||, i.e. the smallest singular value of A.
template <typename Derived>
double min_gain(const Eigen::MatrixBase<Derived>& a) {
  detail::require_square_finite(a, "min_gain");
  if (a.rows() == 1) return std::abs(static_cast<double>(a(0, 0)));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.template cast<double>());
  return svd.singularValues().minCoeff();
}

/// max_{||t||=1} ||A^T t||, i.e. the largest singular value of A.
template <typename Derived>
double op_norm(const Eigen::MatrixBase<Derived>& a) {
  detail::require_square_finite(a, "op_norm");
  if (a.rows() == 1) return std::abs(static_cast<double>(a(0, 0)));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.template cast<double>());
  return svd.singularValues().maxCoeff();
}

/// Canonical embedding of a complex scalar coefficient into a real 2x2
/// rotation-scaling matrix; both singular values equal |v|.
inline Eigen::Matrix2d embed_scalar(std::complex<double> v) {
  Eigen::Matrix2d m;
  m << v.real(), -v.imag(), v.imag(), v.real();
  return m;
}

inline Eigen::Vector2d embed_vector(std::complex<double> b) {
  return Eigen::Vector2d(b.real(), b.imag());
}

}  // namespace sfpe
