#pragma once

// Temperature sensitivity of probe states: ||d_beta L[rho]||_1, its state-independent
// roof, the ground/excited block split of d_beta L[|psi><psi|], and the finite-time
// sensitivity ||d_beta rho_dt||_1.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qmpe/csv.hpp"
#include "qmpe/model.hpp"
#include "qmpe/parallel.hpp"
#include "qmpe/random.hpp"

namespace qmpe {

struct ProbeState {
  CMatrix matrix;
  std::string label = "explicit";

  void validate() const {
    if (matrix.rows() != matrix.cols() || matrix.rows() == 0) throw DimensionError("ProbeState: matrix must be square");
    if ((matrix - matrix.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw ValidationError("ProbeState: not Hermitian");
    if (std::abs(matrix.trace() - 1.0) > 1e-12) throw ValidationError("ProbeState: trace differs from 1");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (matrix + matrix.adjoint()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) throw ValidationError("ProbeState: not positive semidefinite");
  }

  std::size_t dim() const { return static_cast<std::size_t>(matrix.rows()); }

  static ProbeState make(CMatrix m, std::string label = "explicit") {
    ProbeState s{std::move(m), std::move(label)};
    s.validate();
    return s;
  }

  static ProbeState pure(const CVector& psi, std::string label = "explicit") {
    const CVector u = psi / psi.norm();
    return make(u * u.adjoint(), std::move(label));
  }

  static ProbeState ground(std::size_t d) { return make(basis_op(d, 0, 0), "ground"); }

  static ProbeState excited_uniform(std::size_t d) {
    if (d < 2) throw DimensionError("excited_uniform: d must be >= 2");
    CVector v = CVector::Zero(static_cast<Eigen::Index>(d));
    v.tail(static_cast<Eigen::Index>(d - 1)).setConstant(1.0);
    return pure(v, "excited_uniform");
  }

  static ProbeState haar(std::size_t d, std::uint64_t seed, std::uint64_t index = 0) {
    return pure(haar_pure_state(d, seed, index), "haar(" + std::to_string(seed) + ":" + std::to_string(index) + ")");
  }

  // (1 - alpha) tau + alpha |sigma><sigma| with sigma Haar random.
  static ProbeState mixed(double alpha, const CMatrix& tau, std::uint64_t seed, std::uint64_t index = 0) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("mixed: alpha must lie in (0, 1]");
    const CVector s = haar_pure_state(static_cast<std::size_t>(tau.rows()), seed, index);
    CMatrix m = (1.0 - alpha) * tau + alpha * (s * s.adjoint());
    m = 0.5 * (m + m.adjoint());
    m /= m.trace().real();
    return make(std::move(m), "mixed(" + csv::num(alpha) + ":" + std::to_string(seed) + ":" + std::to_string(index) + ")");
  }
};

inline double local_distinguishability(const Liouvillian& liou, const CMatrix& rho) {
  if (static_cast<std::size_t>(rho.rows()) != liou.dim) throw DimensionError("local_distinguishability: size mismatch");
  return trace_norm(liou.apply_beta_derivative(rho));
}

inline double local_distinguishability(const Liouvillian& liou, const ProbeState& rho) {
  rho.validate();
  return local_distinguishability(liou, rho.matrix);
}

// 2 |sum_j d_beta Gamma(omega_j)| over the d-1 transitions.
inline double roof_bound(const ProbeSpec& probe, const BathSpec& bath) {
  double s = 0.0;
  for (std::size_t j = 1; j < probe.d; ++j) s += rate_beta_derivative(bath, probe.energy(j));
  return 2.0 * std::abs(s);
}

// d_beta L[|psi><psi|] for psi = sqrt(eta)|0> + sqrt(1-eta)|psi~>, ground index 0:
//   excited block  (1-eta) A + eta B
//   ground entry   (1-eta) a + eta b
//   column (excited, 0)  sqrt(eta(1-eta)) c
struct BlockData {
  double eta = 1.0;
  CVector psi_tilde;  // excited amplitudes, unit norm
  CMatrix A, B;
  cdouble a, b;
  CVector c;

  CMatrix assemble() const {
    const auto n = A.rows();
    CMatrix m(n + 1, n + 1);
    const double w = std::sqrt(eta * (1.0 - eta));
    m(0, 0) = (1.0 - eta) * a + eta * b;
    m.block(1, 1, n, n) = (1.0 - eta) * A + eta * B;
    m.block(1, 0, n, 1) = w * c;
    m.block(0, 1, 1, n) = w * c.adjoint();
    return m;
  }
};

inline BlockData block_decomposition(const Liouvillian& liou, const CVector& psi) {
  const std::size_t d = liou.dim;
  if (static_cast<std::size_t>(psi.size()) != d || d < 2) throw DimensionError("block_decomposition: size mismatch");
  CVector u = psi / psi.norm();
  // fix the global phase so the ground amplitude is real and nonnegative
  if (std::abs(u(0)) > 0.0) u *= std::conj(u(0)) / std::abs(u(0));
  const auto n = static_cast<Eigen::Index>(d - 1);

  BlockData out;
  out.eta = std::min(1.0, std::norm(u(0)));
  CVector full_tilde = u;
  full_tilde(0) = 0.0;
  const double tn = full_tilde.norm();
  if (tn > 1e-300) {
    full_tilde /= tn;
  } else {
    full_tilde(1) = 1.0;
  }
  out.psi_tilde = full_tilde.tail(n);
  CVector ground = CVector::Zero(static_cast<Eigen::Index>(d));
  ground(0) = 1.0;

  const CMatrix dt = liou.apply_beta_derivative(full_tilde * full_tilde.adjoint());
  const CMatrix d0 = liou.apply_beta_derivative(ground * ground.adjoint());
  const CMatrix x = liou.apply_beta_derivative(full_tilde * ground.adjoint());
  out.A = dt.block(1, 1, n, n);
  out.a = dt(0, 0);
  out.B = d0.block(1, 1, n, n);
  out.b = d0(0, 0);
  out.c = x.block(1, 0, n, 1);
  return out;
}

struct DistinguishabilityReport {
  double value = 0.0;
  double roof = 0.0;
  double gap_to_roof = 0.0;
  std::optional<BlockData> block_data;  // pure states only
};

inline DistinguishabilityReport distinguishability_report(const Liouvillian& liou, const ProbeSpec& probe,
                                                          const BathSpec& bath, const ProbeState& rho) {
  DistinguishabilityReport r;
  r.value = local_distinguishability(liou, rho);
  r.roof = roof_bound(probe, bath);
  r.gap_to_roof = r.roof - r.value;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (rho.matrix + rho.matrix.adjoint()));
  const auto& ev = es.eigenvalues();
  if (ev(ev.size() - 1) > 1.0 - 1e-12) r.block_data = block_decomposition(liou, es.eigenvectors().col(ev.size() - 1));
  return r;
}

struct OptimalityReport {
  double max_sampled = 0.0;
  std::string argmax_label;
  double roof = 0.0;
  double ground_value = 0.0;
  std::size_t evaluated = 0;
  bool ok = true;
  std::optional<ProbeState> counterexample;
  std::vector<std::pair<std::string, double>> values;  // label -> value, evaluation order
};

// Haar pure states (substreams of `seed`) plus every basis state and the uniform
// superpositions; the ground state is scored separately.
inline OptimalityReport verify_ground_optimality(const Liouvillian& liou, const ProbeSpec& probe, const BathSpec& bath,
                                                 std::size_t n_samples, std::uint64_t seed,
                                                 std::size_t parallel_width = 1, double tol = 1e-9) {
  if (n_samples < 1) throw ValidationError("verify_ground_optimality: n_samples must be >= 1");
  const std::size_t d = probe.d;
  OptimalityReport rep;
  rep.roof = roof_bound(probe, bath);
  rep.ground_value = local_distinguishability(liou, ProbeState::ground(d));

  std::vector<ProbeState> structured;
  for (std::size_t k = 1; k < d; ++k) structured.push_back(ProbeState::make(basis_op(d, k, k), "basis(" + std::to_string(k) + ")"));
  structured.push_back(ProbeState::pure(CVector::Ones(static_cast<Eigen::Index>(d)), "uniform_all"));
  structured.push_back(ProbeState::excited_uniform(d));

  const auto sampled = parallel_map(n_samples, parallel_width, [&](std::size_t i) {
    const auto s = ProbeState::haar(d, seed, i);
    return std::make_pair(s.label, local_distinguishability(liou, s));
  });
  for (const auto& s : structured) rep.values.emplace_back(s.label, local_distinguishability(liou, s));
  rep.values.insert(rep.values.end(), sampled.begin(), sampled.end());

  rep.max_sampled = -1.0;
  for (std::size_t i = 0; i < rep.values.size(); ++i) {
    const auto& [label, v] = rep.values[i];
    if (v > rep.max_sampled) {
      rep.max_sampled = v;
      rep.argmax_label = label;
    }
    if (v > rep.roof + tol && !rep.counterexample) {
      rep.ok = false;
      rep.counterexample = i < structured.size() ? structured[i] : ProbeState::haar(d, seed, i - structured.size());
    }
  }
  rep.evaluated = rep.values.size();
  if (rep.ground_value < rep.roof - tol) {
    rep.ok = false;
    if (!rep.counterexample) rep.counterexample = ProbeState::ground(d);
  }
  return rep;
}

struct FiniteTimeResult {
  double value = 0.0;
  double halved_step_value = 0.0;  // same quantity at dbeta / 2
  bool roundoff_warning = false;   // the two disagree by more than 10 %
};

// ||(rho_dt(beta + h) - rho_dt(beta - h)) / 2h||_1 with the four propagators built once,
// so many initial states can be scored cheaply.
class FiniteTimeSensitivity {
 public:
  FiniteTimeSensitivity(const ProbeSpec& probe, const BathSpec& bath, double dt, double dbeta = 0.0)
      : dt_(dt), dbeta_(dbeta > 0.0 ? dbeta : 1e-4 * bath.beta) {
    if (dt < 0.0) throw DomainError("finite_time_distinguishability: dt must be >= 0");
    if (dbeta < 0.0) throw DomainError("finite_time_distinguishability: dbeta must be > 0");
    if (dbeta_ >= bath.beta) throw DomainError("finite_time_distinguishability: dbeta must be below beta");
    if (dt == 0.0) return;
    auto step = [&](double b) { return expm(build_liouvillian(probe, bath.at_beta(b)).matrix * dt); };
    plus_ = step(bath.beta + dbeta_);
    minus_ = step(bath.beta - dbeta_);
    plus_half_ = step(bath.beta + 0.5 * dbeta_);
    minus_half_ = step(bath.beta - 0.5 * dbeta_);
  }

  double dt() const { return dt_; }
  double dbeta() const { return dbeta_; }

  FiniteTimeResult evaluate(const CMatrix& rho0) const {
    FiniteTimeResult r;
    if (dt_ == 0.0) return r;
    const CVector v = vectorize(rho0);
    auto norm_of = [&](const CMatrix& p, const CMatrix& m, double h) {
      const CMatrix diff = devectorize((p * v - m * v) / (2.0 * h));
      return trace_norm(0.5 * (diff + diff.adjoint()));
    };
    r.value = norm_of(plus_, minus_, dbeta_);
    r.halved_step_value = norm_of(plus_half_, minus_half_, 0.5 * dbeta_);
    const double scale = std::max(r.value, r.halved_step_value);
    r.roundoff_warning = scale > 0.0 && std::abs(r.value - r.halved_step_value) > 0.1 * scale;
    return r;
  }

  FiniteTimeResult evaluate(const ProbeState& rho0) const {
    rho0.validate();
    return evaluate(rho0.matrix);
  }

 private:
  double dt_;
  double dbeta_;
  CMatrix plus_, minus_, plus_half_, minus_half_;
};

inline FiniteTimeResult finite_time_distinguishability(const ProbeSpec& probe, const BathSpec& bath,
                                                       const ProbeState& rho0, double dt, double dbeta = 0.0) {
  return FiniteTimeSensitivity(probe, bath, dt, dbeta).evaluate(rho0);
}

struct ThermometryRow {
  std::string state_label;
  std::optional<std::uint64_t> seed;
  double value = 0.0;
  double roof = 0.0;
};

inline void write_thermometry_csv(std::ostream& os, const std::vector<ThermometryRow>& rows) {
  os << "state_label,seed,value,roof,gap\n";
  for (const auto& r : rows)
    os << csv::field(r.state_label) << ',' << (r.seed ? std::to_string(*r.seed) : std::string()) << ','
       << csv::num(r.value) << ',' << csv::num(r.roof) << ',' << csv::num(r.roof - r.value) << '\n';
}

}  // namespace qmpe
