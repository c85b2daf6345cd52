#pragma once

// Dense complex kernel: row-major vectorization, Kronecker products, norms,
// general eigenpairs and the matrix exponential. Sized for d^2 <= 400.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "qmpe/errors.hpp"

namespace qmpe {

using cdouble = std::complex<double>;
using CMatrix = Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CVector = Eigen::Matrix<cdouble, Eigen::Dynamic, 1>;
using RVector = Eigen::VectorXd;

inline constexpr cdouble kI{0.0, 1.0};

struct Tolerances {
  double eig_residual = 1e-9;
  double norm_compare = 1e-10;
  double hermitian = 1e-14;
};

inline CMatrix identity(std::size_t d) {
  return CMatrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
}

inline CMatrix basis_op(std::size_t d, std::size_t a, std::size_t b) {
  CMatrix m = CMatrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = 1.0;
  return m;
}

// |a><b| -> |a>|b*>, so entry (i*d + j) of the result is m(i, j).
inline CVector vectorize(const CMatrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("vectorize: matrix must be square");
  CVector v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  return v;
}

inline CMatrix devectorize(const CVector& v) {
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (d * d != v.size()) throw DimensionError("devectorize: length is not a perfect square");
  CMatrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = v(i * d + j);
  return m;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Superoperator of X -> A X B in the row-major vectorization: kron(A, B^T).
inline CMatrix sandwich(const CMatrix& left, const CMatrix& right) {
  return kron(left, right.transpose());
}

inline double frobenius_norm(const CMatrix& m) { return m.norm(); }

inline double norm1(const CMatrix& m) {
  double best = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) best = std::max(best, m.col(j).cwiseAbs().sum());
  return best;
}

inline bool is_hermitian(const CMatrix& m, double rel_tol = Tolerances{}.hermitian) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.norm());
  return (m - m.adjoint()).norm() <= rel_tol * scale;
}

inline RVector singular_values(const CMatrix& m) {
  Eigen::BDCSVD<CMatrix> svd(m);
  return svd.singularValues();
}

// Sum of singular values. Hermitian input goes through the Hermitian eigensolver.
inline double trace_norm(const CMatrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("trace_norm: matrix must be square");
  if (m.size() == 0) return 0.0;
  if (is_hermitian(m)) {
    const CMatrix h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
  }
  return singular_values(m).sum();
}

struct EigenPair {
  cdouble value;
  CVector vector;
};

// Eigenpairs of a general square matrix, unit-norm vectors, multiplicity counted.
// Throws ConvergenceError if any pair misses the residual contract.
inline std::vector<EigenPair> eig_general(const CMatrix& m, double rel_residual = Tolerances{}.eig_residual) {
  if (m.rows() != m.cols()) throw DimensionError("eig_general: matrix must be square");
  if (m.rows() > 400) throw DimensionError("eig_general: dimension above 400");
  std::vector<EigenPair> out;
  if (m.rows() == 0) return out;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m, true);
  if (es.info() != Eigen::Success) throw ConvergenceError("eig_general: QR iteration did not converge", -1.0);
  const double scale = std::max(m.norm(), 1e-300);
  double worst = 0.0;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    CVector v = es.eigenvectors().col(k);
    v /= v.norm();
    const cdouble lambda = es.eigenvalues()(k);
    const double res = (m * v - lambda * v).norm() / scale;
    worst = std::max(worst, res);
    out.push_back({lambda, std::move(v)});
  }
  if (worst > rel_residual) throw ConvergenceError("eig_general: residual contract violated", worst);
  return out;
}

// exp(m) by scaling and squaring around a truncated Taylor series.
inline CMatrix expm(const CMatrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("expm: matrix must be square");
  const Eigen::Index n = m.rows();
  const double nrm = norm1(m);
  int squarings = 0;
  if (nrm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
  const CMatrix a = m / std::ldexp(1.0, squarings);
  CMatrix result = CMatrix::Identity(n, n);
  CMatrix term = CMatrix::Identity(n, n);
  for (int k = 1; k <= 40; ++k) {
    term = (term * a) / static_cast<double>(k);
    result += term;
    if (norm1(term) <= 1e-18 * norm1(result)) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

// exp(t*m) v via sub-stepped Taylor series on the vector; never forms exp(t*m).
inline CVector expm_action(const CMatrix& m, const CVector& v, double t) {
  if (m.rows() != m.cols() || m.cols() != v.size()) throw DimensionError("expm_action: shape mismatch");
  if (t < 0.0) throw DomainError("expm_action: t must be non-negative");
  if (t == 0.0 || v.size() == 0) return v;
  const double nrm = norm1(m) * t;
  const int steps = std::max(1, static_cast<int>(std::ceil(nrm)));
  const double h = t / steps;
  CVector x = v;
  for (int s = 0; s < steps; ++s) {
    CVector term = x;
    CVector acc = x;
    for (int k = 1; k <= 60; ++k) {
      term = (m * term) * (h / k);
      acc += term;
      if (term.norm() <= 1e-17 * acc.norm()) break;
    }
    x = std::move(acc);
  }
  return x;
}

}  // namespace qmpe
