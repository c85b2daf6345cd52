#pragma once

// Trace-norm inequalities for 2x2 block matrices [[X, c], [c^dag, x]] and the
// conditions under which the ground state maximizes ||d_beta L[rho]||_1.

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "qmpe/csv.hpp"
#include "qmpe/random.hpp"
#include "qmpe/thermometry.hpp"

namespace qmpe {

inline CMatrix bordered(const CMatrix& top, const CVector& c, cdouble corner) {
  const auto n = top.rows();
  if (top.cols() != n || c.size() != n) throw DimensionError("bordered: inconsistent block sizes");
  CMatrix m(n + 1, n + 1);
  m.topLeftCorner(n, n) = top;
  m.block(0, n, n, 1) = c;
  m.block(n, 0, 1, n) = c.adjoint();
  m(n, n) = corner;
  return m;
}

struct InequalityResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = true;
};

// ||[[A, c], [c^dag, b]]||_1 <= ||A||_1 + sqrt(4 ||c||^2 + |b|^2).
inline InequalityResult lemma1_check(const CMatrix& a_block, const CVector& c, cdouble b, double tol = 1e-9) {
  InequalityResult r;
  r.lhs = trace_norm(bordered(a_block, c, b));
  r.rhs = trace_norm(a_block) + std::sqrt(4.0 * c.squaredNorm() + std::norm(b));
  r.holds = r.lhs <= r.rhs + tol;
  return r;
}

struct BlockInstance {
  CMatrix A, B;
  CVector c;
  cdouble a, b;
  double alpha = 0.5;

  void validate() const {
    const auto n = A.rows();
    if (A.cols() != n || B.rows() != n || B.cols() != n || c.size() != n) throw DimensionError("BlockInstance: inconsistent sizes");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("BlockInstance: alpha must lie in [0, 1]");
  }

  CMatrix assemble() const {
    const double w = std::sqrt(alpha * (1.0 - alpha));
    return bordered(alpha * A + (1.0 - alpha) * B, w * c, alpha * a + (1.0 - alpha) * b);
  }
};

struct ConditionFlags {
  bool cond1 = false;  // |a - b| >= 2||c||, or the critical mixing weight lies outside [0, 1]
  bool cond2 = false;  // (||A||_1 - ||B||_1)(|a| - |b|) >= 0
};

inline ConditionFlags block_conditions(const BlockInstance& in, double degenerate_tol = 1e-12) {
  ConditionFlags f;
  const double c2 = in.c.squaredNorm();
  const cdouble diff = in.a - in.b;
  f.cond1 = std::abs(diff) >= 2.0 * std::sqrt(c2);
  if (!f.cond1) {
    const cdouble den = 4.0 * c2 - diff * diff;
    // a vanishing denominator leaves only the first branch
    if (std::abs(den) > degenerate_tol) {
      const cdouble crit = (2.0 * c2 + diff * in.b) / den;
      const bool inside = std::abs(crit.imag()) <= degenerate_tol && crit.real() >= 0.0 && crit.real() <= 1.0;
      f.cond1 = !inside;
    }
  }
  f.cond2 = (trace_norm(in.A) - trace_norm(in.B)) * (std::abs(in.a) - std::abs(in.b)) >= 0.0;
  return f;
}

struct Lemma2Result {
  ConditionFlags flags;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = true;  // the inequality itself, whatever the flags say
  bool conditions_met() const { return flags.cond1 && flags.cond2; }
  bool violation() const { return conditions_met() && !holds; }
};

// ||[[alpha A + (1-alpha) B, sqrt(alpha(1-alpha)) c], [., alpha a + (1-alpha) b]]||_1
//   <= max(||A (+) a||_1, ||B (+) b||_1)
inline Lemma2Result lemma2_check(const BlockInstance& in, double tol = 1e-9) {
  in.validate();
  Lemma2Result r;
  r.flags = block_conditions(in);
  r.lhs = trace_norm(in.assemble());
  r.rhs = std::max(trace_norm(in.A) + std::abs(in.a), trace_norm(in.B) + std::abs(in.b));
  r.holds = r.lhs <= r.rhs + tol;
  return r;
}

enum class BlockRegime {
  hermitian,  // A, B Hermitian, a, b real, c complex
  general,    // everything complex, no symmetry
};

namespace detail {
inline CMatrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index n, bool hermitian) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double re = g(rng);
      m(i, j) = cdouble(re, g(rng));
    }
  return hermitian ? CMatrix(0.5 * (m + m.adjoint())) : m;
}

inline CVector gaussian_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = g(rng);
    v(i) = cdouble(re, g(rng));
  }
  return v;
}

inline cdouble gaussian_scalar(std::mt19937_64& rng, bool real) {
  std::normal_distribution<double> g(0.0, 1.0);
  const double re = g(rng);
  return real ? cdouble(re, 0.0) : cdouble(re, g(rng));
}
}  // namespace detail

// Complex Gaussian entries; the coupling and corner entries get an exponential
// scale so both branches of condition 1 are visited.
inline BlockInstance random_block_instance(std::mt19937_64& rng, std::size_t d, BlockRegime regime) {
  const bool herm = regime == BlockRegime::hermitian;
  const auto n = static_cast<Eigen::Index>(d);
  std::exponential_distribution<double> scale(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  BlockInstance in;
  in.A = detail::gaussian_matrix(rng, n, herm);
  in.B = detail::gaussian_matrix(rng, n, herm);
  in.c = detail::gaussian_vector(rng, n) * scale(rng);
  in.a = 3.0 * scale(rng) * detail::gaussian_scalar(rng, herm);
  in.b = 3.0 * scale(rng) * detail::gaussian_scalar(rng, herm);
  in.alpha = unit(rng);
  return in;
}

// Rejection-samples instance `index` of the stream until both conditions hold.
inline std::optional<BlockInstance> condition_satisfying_instance(std::size_t d, std::uint64_t seed, std::uint64_t index,
                                                                  BlockRegime regime = BlockRegime::hermitian,
                                                                  std::size_t max_attempts = 100000) {
  auto rng = substream(seed, index);
  for (std::size_t k = 0; k < max_attempts; ++k) {
    auto in = random_block_instance(rng, d, regime);
    const auto f = block_conditions(in);
    if (f.cond1 && f.cond2) return in;
  }
  return std::nullopt;
}

struct LemmaRecord {
  std::size_t instance_id = 0;
  Lemma2Result result;
};

struct LemmaSweep {
  std::size_t evaluated = 0;
  std::size_t violations = 0;
  std::size_t exhausted = 0;  // rejection sampling hit its cap
  std::vector<LemmaRecord> records;
  std::vector<BlockInstance> counterexamples;
};

inline LemmaSweep lemma2_sweep(std::size_t n, std::size_t d, std::uint64_t seed,
                               BlockRegime regime = BlockRegime::hermitian, bool keep_records = false) {
  LemmaSweep s;
  for (std::size_t i = 0; i < n; ++i) {
    const auto in = condition_satisfying_instance(d, seed, i, regime);
    if (!in) {
      ++s.exhausted;
      continue;
    }
    const auto r = lemma2_check(*in);
    ++s.evaluated;
    if (r.violation()) {
      ++s.violations;
      s.counterexamples.push_back(*in);
    }
    if (keep_records) s.records.push_back({i, r});
  }
  return s;
}

struct Lemma1Sweep {
  std::size_t evaluated = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;  // lhs / rhs
};

inline Lemma1Sweep lemma1_sweep(std::size_t n, std::size_t d, std::uint64_t seed, BlockRegime regime) {
  Lemma1Sweep s;
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = substream(seed, i);
    const auto in = random_block_instance(rng, d, regime);
    const auto r = lemma1_check(in.A, in.c, in.b);
    ++s.evaluated;
    if (!r.holds) ++s.violations;
    if (r.rhs > 0.0) s.max_ratio = std::max(s.max_ratio, r.lhs / r.rhs);
  }
  return s;
}

// Instances drawn without conditioning; those breaking a condition and the
// inequality are kept. Informational: nothing is claimed when a condition fails.
inline std::vector<LemmaRecord> violation_gallery(std::size_t attempts, std::size_t d, std::uint64_t seed,
                                                  BlockRegime regime = BlockRegime::hermitian) {
  std::vector<LemmaRecord> out;
  for (std::size_t i = 0; i < attempts; ++i) {
    auto rng = substream(seed, i);
    const auto r = lemma2_check(random_block_instance(rng, d, regime));
    if (!r.conditions_met() && !r.holds) out.push_back({i, r});
  }
  return out;
}

inline void write_lemma_csv(std::ostream& os, const std::vector<LemmaRecord>& rows) {
  os << "instance_id,cond1,cond2,lhs,rhs,holds\n";
  for (const auto& r : rows)
    os << r.instance_id << ',' << (r.result.flags.cond1 ? "true" : "false") << ','
       << (r.result.flags.cond2 ? "true" : "false") << ',' << csv::num(r.result.lhs) << ',' << csv::num(r.result.rhs)
       << ',' << (r.result.holds ? "true" : "false") << '\n';
}

struct ThermometryConditions {
  bool ground_dominates = false;     // |b| >= |a|
  bool coupling_dominates = false;   // (a - b)^2 <= 4 ||c||^2
  bool critical_weight = false;      // b (a - b) + 2 ||c||^2 <= 0
  bool excited_block = false;        // ||A||_1 <= ||B||_1
  BlockData blocks;

  bool all() const { return ground_dominates && coupling_dominates && critical_weight && excited_block; }
};

// The four block conditions for psi~ = sum_j psi_j |j> (excited amplitudes, j = 1..d-1),
// read off the assembled d_beta L. Comparisons carry a relative slack of `tol`.
inline ThermometryConditions thermometry_conditions_check(const ProbeSpec& probe, const BathSpec& bath,
                                                          const CVector& excited_amplitudes, double tol = 1e-12) {
  if (static_cast<std::size_t>(excited_amplitudes.size()) + 1 != probe.d)
    throw DimensionError("thermometry_conditions_check: need d-1 excited amplitudes");
  if (std::abs(excited_amplitudes.norm() - 1.0) > 1e-10) throw ValidationError("thermometry_conditions_check: amplitudes must be normalized");
  const auto liou = build_liouvillian(probe, bath);
  CVector psi = CVector::Zero(static_cast<Eigen::Index>(probe.d));
  psi.tail(excited_amplitudes.size()) = excited_amplitudes;
  ThermometryConditions out;
  out.blocks = block_decomposition(liou, psi);
  const double a = out.blocks.a.real(), b = out.blocks.b.real();
  const double c2 = out.blocks.c.squaredNorm();
  const double scale = std::max({std::abs(a), std::abs(b), c2, 1e-300});
  const double slack = tol * scale * scale + tol * scale;
  out.ground_dominates = std::abs(b) >= std::abs(a) - tol * scale;
  out.coupling_dominates = (a - b) * (a - b) <= 4.0 * c2 + slack;
  out.critical_weight = b * (a - b) + 2.0 * c2 <= slack;
  out.excited_block = trace_norm(out.blocks.A) <= trace_norm(out.blocks.B) * (1.0 + tol) + tol;
  return out;
}

}  // namespace qmpe
