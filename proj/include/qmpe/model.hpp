#pragma once

// Star-topology probe coupled to a bosonic bath: rates, Davies dissipators,
// the vectorized Liouvillian and its inverse-temperature derivative.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "qmpe/errors.hpp"
#include "qmpe/linalg.hpp"

namespace qmpe {

struct ProbeSpec {
  std::size_t d = 2;
  double gap = 1.0;
  std::vector<double> detunings;  // epsilon_j for j = 1..d-1
  double epsilon_max = 0.0;

  // Deterministic ramp epsilon_j = eps (2j - d)/(d - 2); a single level at d = 2 gets zero.
  static ProbeSpec ramp(std::size_t d, double gap, double eps) {
    ProbeSpec p;
    p.d = d;
    p.gap = gap;
    p.epsilon_max = eps;
    if (d < 2) throw ValidationError("ProbeSpec: d must be >= 2");
    p.detunings.assign(d - 1, 0.0);
    if (d > 2)
      for (std::size_t j = 1; j < d; ++j)
        p.detunings[j - 1] = eps * (2.0 * static_cast<double>(j) - static_cast<double>(d)) /
                             (static_cast<double>(d) - 2.0);
    p.validate();
    return p;
  }

  static ProbeSpec with_detunings(double gap, std::vector<double> detunings, double eps_max) {
    ProbeSpec p;
    p.d = detunings.size() + 1;
    p.gap = gap;
    p.detunings = std::move(detunings);
    p.epsilon_max = eps_max;
    p.validate();
    return p;
  }

  void validate() const {
    if (d < 2) throw ValidationError("ProbeSpec: d must be >= 2");
    if (detunings.size() != d - 1) throw ValidationError("ProbeSpec: need d-1 detunings");
    if (!(epsilon_max >= 0.0)) throw ValidationError("ProbeSpec: epsilon must be >= 0");
    for (double e : detunings) {
      if (!std::isfinite(e) || std::abs(e) > epsilon_max * (1.0 + 1e-12) + 1e-300)
        throw ValidationError("ProbeSpec: |epsilon_j| exceeds epsilon");
      if (!(gap + e > 0.0)) throw ValidationError("ProbeSpec: excited energies must be positive");
    }
  }

  bool degenerate() const {
    for (double e : detunings)
      if (e != 0.0) return false;
    return true;
  }

  double energy(std::size_t j) const { return j == 0 ? 0.0 : gap + detunings[j - 1]; }

  std::vector<double> energies() const {
    std::vector<double> w(d);
    for (std::size_t j = 0; j < d; ++j) w[j] = energy(j);
    return w;
  }
};

enum class SpectralKind { flat, ohmic };

struct SpectralDensity {
  SpectralKind kind = SpectralKind::flat;
  double omega_ref = 1.0;  // ohmic only: J(w) = gamma * w / omega_ref
};

struct BathSpec {
  double beta = 1.0;
  double gamma = 1.0;
  SpectralDensity density;

  void validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("BathSpec: beta must be > 0");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("BathSpec: gamma must be > 0");
    if (density.kind == SpectralKind::ohmic && !(density.omega_ref > 0.0))
      throw ValidationError("BathSpec: ohmic omega_ref must be > 0");
  }

  BathSpec at_beta(double b) const {
    BathSpec out = *this;
    out.beta = b;
    return out;
  }

  // J(w) for w > 0
  double coupling(double omega) const {
    return density.kind == SpectralKind::flat ? gamma : gamma * omega / density.omega_ref;
  }

  double coupling_derivative(double omega) const {
    (void)omega;
    return density.kind == SpectralKind::flat ? 0.0 : gamma / density.omega_ref;
  }
};

// Bose occupation 1/(exp(beta w) - 1).
inline double occupation(double beta, double omega) { return 1.0 / std::expm1(beta * omega); }

// d/dbeta of the occupation: -w e^{beta w} n^2.
inline double occupation_beta_derivative(double beta, double omega) {
  const double n = occupation(beta, omega);
  return -omega * std::exp(beta * omega) * n * n;
}

// Gamma_beta(w) = J(w) n(w) for w > 0 and J(|w|)(1 + n(|w|)) for w < 0.
inline double rate(const BathSpec& bath, double omega) {
  if (omega == 0.0) throw DomainError("rate: omega = 0 (Bose divergence)");
  const double w = std::abs(omega);
  const double n = occupation(bath.beta, w);
  return omega > 0.0 ? bath.coupling(w) * n : bath.coupling(w) * (1.0 + n);
}

// Both absorption and emission rates share the derivative J(|w|) dn/dbeta.
inline double rate_beta_derivative(const BathSpec& bath, double omega) {
  if (omega == 0.0) throw DomainError("rate_beta_derivative: omega = 0");
  const double w = std::abs(omega);
  return bath.coupling(w) * occupation_beta_derivative(bath.beta, w);
}

// g = |d/dw log(e^{beta w} Gamma_beta(w))| = |J'/J - beta n|.
inline double log_derivative_constant(const BathSpec& bath, double omega) {
  if (!(omega > 0.0)) throw DomainError("log_derivative_constant: omega must be > 0");
  const double n = occupation(bath.beta, omega);
  return std::abs(bath.coupling_derivative(omega) / bath.coupling(omega) - bath.beta * n);
}

// argmax |dGamma/dbeta| on 400 grid points over (0, 10/beta]; documentation only.
inline double optimal_frequency(const BathSpec& bath, std::size_t points = 400) {
  double best_w = 0.0, best = -1.0;
  const double top = 10.0 / bath.beta;
  for (std::size_t k = 1; k <= points; ++k) {
    const double w = top * static_cast<double>(k) / static_cast<double>(points);
    const double v = std::abs(rate_beta_derivative(bath, w));
    if (v > best) {
      best = v;
      best_w = w;
    }
  }
  return best_w;
}

struct Liouvillian {
  std::size_t dim = 0;
  CMatrix matrix;
  CMatrix hamiltonian_part;
  CMatrix dissipative_part;
  CMatrix beta_derivative;

  CMatrix adjoint() const { return matrix.adjoint(); }

  CMatrix apply(const CMatrix& rho) const { return devectorize(matrix * vectorize(rho)); }
  CMatrix apply_beta_derivative(const CMatrix& rho) const {
    return devectorize(beta_derivative * vectorize(rho));
  }
};

// D[rho] = J rho J^dag - {J^dag J, rho}/2 for J = |to><from|.
inline CMatrix transition_dissipator(std::size_t d, std::size_t from, std::size_t to) {
  const CMatrix jump = basis_op(d, to, from);
  const CMatrix jd = jump.adjoint();
  const CMatrix jdj = jd * jump;
  const CMatrix id = identity(d);
  return sandwich(jump, jd) - 0.5 * sandwich(jdj, id) - 0.5 * sandwich(id, jdj);
}

inline Liouvillian build_liouvillian(const ProbeSpec& probe, const BathSpec& bath) {
  probe.validate();
  bath.validate();
  const std::size_t d = probe.d;
  const auto n2 = static_cast<Eigen::Index>(d * d);
  CMatrix h = CMatrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = probe.energy(j);
  const CMatrix id = identity(d);

  Liouvillian out;
  out.dim = d;
  out.hamiltonian_part = -kI * (sandwich(h, id) - sandwich(id, h));
  out.dissipative_part = CMatrix::Zero(n2, n2);
  out.beta_derivative = CMatrix::Zero(n2, n2);
  for (std::size_t j = 1; j < d; ++j) {
    const double w = probe.energy(j);
    const CMatrix down = transition_dissipator(d, j, 0);
    const CMatrix up = transition_dissipator(d, 0, j);
    out.dissipative_part += rate(bath, -w) * down + rate(bath, w) * up;
    out.beta_derivative += rate_beta_derivative(bath, -w) * down + rate_beta_derivative(bath, w) * up;
  }
  out.matrix = out.hamiltonian_part + out.dissipative_part;
  return out;
}

inline CMatrix gibbs_state(const ProbeSpec& probe, const BathSpec& bath) {
  probe.validate();
  bath.validate();
  const auto w = probe.energies();
  const double wmin = *std::min_element(w.begin(), w.end());
  std::vector<double> p(w.size());
  double z = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) z += (p[j] = std::exp(-bath.beta * (w[j] - wmin)));
  CMatrix tau = CMatrix::Zero(static_cast<Eigen::Index>(w.size()), static_cast<Eigen::Index>(w.size()));
  for (std::size_t j = 0; j < w.size(); ++j) tau(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = p[j] / z;
  return tau;
}

// max |Gamma(w)/Gamma(-w) - e^{-beta w}| over the grid.
inline double kms_check(const ProbeSpec& probe, const BathSpec& bath, const std::vector<double>& omegas) {
  (void)probe;
  double worst = 0.0;
  for (double w : omegas) {
    if (w == 0.0) throw DomainError("kms_check: omega must be nonzero");
    worst = std::max(worst, std::abs(rate(bath, w) / rate(bath, -w) - std::exp(-bath.beta * w)));
  }
  return worst;
}

// Vectorized index k = i*d + j belongs to the population subspace iff i == j.
inline bool is_population_index(std::size_t k, std::size_t d) { return k / d == k % d; }

}  // namespace qmpe
