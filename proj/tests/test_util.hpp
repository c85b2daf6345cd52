#pragma once

#include <random>

#include "qmpe/linalg.hpp"

namespace qmpe::testing {

inline CMatrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = cdouble(n(rng), n(rng));
  return m;
}

inline CVector random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = cdouble(g(rng), g(rng));
  return v;
}

inline CMatrix random_hermitian(std::mt19937_64& rng, Eigen::Index n) {
  const CMatrix m = random_matrix(rng, n, n);
  return 0.5 * (m + m.adjoint());
}

inline CMatrix random_unitary(std::mt19937_64& rng, Eigen::Index n) {
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(random_matrix(rng, n, n));
  return qr.householderQ();
}

// Random density matrix: Wishart-normalized with a random rank.
inline CMatrix random_density(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_int_distribution<Eigen::Index> rk(1, n);
  const CMatrix g = random_matrix(rng, n, rk(rng));
  CMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return 0.5 * (rho + rho.adjoint());
}

}  // namespace qmpe::testing
