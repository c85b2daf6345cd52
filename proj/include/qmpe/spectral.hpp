#pragma once

// Biorthonormal eigentriples (lambda, r, l) of the Liouvillian: the exact
// zero-detuning solution, the numerical solution for any detuning, mode
// overlaps, and the first-order overlap bound for the ground-state probe.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "qmpe/errors.hpp"
#include "qmpe/linalg.hpp"
#include "qmpe/model.hpp"

namespace qmpe {

enum class Subspace { population, coherence };

inline const char* to_string(Subspace s) { return s == Subspace::population ? "population" : "coherence"; }

struct EigenTriple {
  cdouble lambda;
  CMatrix right_op;  // unit Frobenius norm
  CMatrix left_op;   // Tr(left^dag right) = 1
  Subspace subspace_tag = Subspace::population;
  double residual = 0.0;  // ||L[r] - lambda r||_F
};

struct SpectralData {
  std::vector<EigenTriple> triples;  // ascending |Re lambda|
  double lambda_min_nonzero = 0.0;
  double lambda_max = 0.0;

  std::size_t size() const { return triples.size(); }

  // Largest |Tr(l_i^dag r_j) - delta_ij|.
  double biorthogonality_error() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < triples.size(); ++i)
      for (std::size_t j = 0; j < triples.size(); ++j) {
        const cdouble ip = (triples[i].left_op.conjugate().cwiseProduct(triples[j].right_op)).sum();
        worst = std::max(worst, std::abs(ip - (i == j ? 1.0 : 0.0)));
      }
    return worst;
  }
};

struct SpectralOptions {
  double cluster_tol = 1e-6;    // eigenvalues closer than this are treated as degenerate
  double zero_tol = 1e-9;
  double residual_tol = 1e-8;
};

namespace detail {

inline void sort_and_summarize(SpectralData& s, double zero_tol) {
  std::stable_sort(s.triples.begin(), s.triples.end(), [](const EigenTriple& a, const EigenTriple& b) {
    const double ra = std::abs(a.lambda.real()), rb = std::abs(b.lambda.real());
    if (ra != rb) return ra < rb;
    if (a.subspace_tag != b.subspace_tag) return a.subspace_tag == Subspace::population;
    return a.lambda.imag() < b.lambda.imag();
  });
  std::size_t zeros = 0;
  s.lambda_min_nonzero = 0.0;
  s.lambda_max = 0.0;
  for (const auto& t : s.triples) {
    if (std::abs(t.lambda) <= zero_tol) {
      ++zeros;
      continue;
    }
    const double r = std::abs(t.lambda.real());
    if (s.lambda_min_nonzero == 0.0 || r < s.lambda_min_nonzero) s.lambda_min_nonzero = r;
    s.lambda_max = std::max(s.lambda_max, r);
  }
  if (zeros != 1) throw PairingError("spectrum must contain exactly one zero eigenvalue, found " + std::to_string(zeros));
}

// Scales r to unit Frobenius norm and l so that Tr(l^dag r) = 1.
inline void normalize_pair(CVector& r, CVector& l) {
  const double nr = r.norm();
  r /= nr;
  l *= nr;
  const cdouble ip = l.dot(r);  // l^dag r
  l /= std::conj(ip);
}

struct BlockTriple {
  cdouble lambda;
  CVector right;
  CVector left;
};

inline std::vector<std::vector<std::size_t>> cluster(const std::vector<cdouble>& values, double tol) {
  const std::size_t n = values.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(values[i] - values[j]) <= tol) parent[find(i)] = find(j);
  std::vector<std::vector<std::size_t>> groups;
  std::vector<long> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = find(i);
    if (slot[root] < 0) {
      slot[root] = static_cast<long>(groups.size());
      groups.emplace_back();
    }
    groups[static_cast<std::size_t>(slot[root])].push_back(i);
  }
  return groups;
}

// Eigentriples of one invariant block. Singletons pair right eigenvectors of B with
// left eigenvectors from B^dag; degenerate clusters are resolved on the invariant
// subspace spanned by the near-null singular vectors of (B - mean*I).
inline std::vector<BlockTriple> block_triples(const CMatrix& block, const SpectralOptions& opt) {
  const auto right = eig_general(block);
  const auto left = eig_general(block.adjoint());
  std::vector<cdouble> values;
  values.reserve(right.size());
  for (const auto& p : right) values.push_back(p.value);
  std::vector<bool> used(left.size(), false);

  std::vector<BlockTriple> out;
  for (const auto& group : cluster(values, opt.cluster_tol)) {
    const std::size_t k = group.size();
    cdouble mean = 0.0;
    for (auto i : group) mean += values[i];
    mean /= static_cast<double>(k);

    // consume k left partners; a missing partner is a pairing failure
    for (std::size_t m = 0; m < k; ++m) {
      std::size_t best = left.size();
      double best_dist = 0.0;
      for (std::size_t j = 0; j < left.size(); ++j) {
        if (used[j]) continue;
        const double dist = std::abs(std::conj(left[j].value) - mean);
        if (best == left.size() || dist < best_dist) {
          best = j;
          best_dist = dist;
        }
      }
      if (best == left.size() || best_dist > std::max(opt.cluster_tol * static_cast<double>(k), 1e-6))
        throw PairingError("numerical_spectrum: no left partner near lambda = " + std::to_string(mean.real()) +
                           std::to_string(mean.imag()) + "i");
      used[best] = true;
      if (k == 1) {
        CVector r = right[group[0]].vector;
        CVector l = left[best].vector;
        if (std::abs(l.dot(r)) < 1e-12) throw PairingError("numerical_spectrum: left/right pair is orthogonal");
        normalize_pair(r, l);
        out.push_back({values[group[0]], std::move(r), std::move(l)});
      }
    }
    if (k == 1) continue;

    const Eigen::Index n = block.rows();
    const auto kk = static_cast<Eigen::Index>(k);
    const CMatrix shifted = block - mean * CMatrix::Identity(n, n);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(shifted, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::MatrixXcd rc = svd.matrixV().rightCols(kk);
    const Eigen::MatrixXcd lc = svd.matrixU().rightCols(kk);
    const Eigen::MatrixXcd gram = lc.adjoint() * rc;
    const Eigen::MatrixXcd small = gram.lu().solve(lc.adjoint() * block * rc);
    Eigen::MatrixXcd w = Eigen::MatrixXcd::Identity(kk, kk);
    Eigen::VectorXcd vals = small.diagonal();
    // an exactly degenerate block keeps the orthonormal singular-vector basis
    const cdouble centre = small.trace() / static_cast<double>(k);
    if ((small - centre * Eigen::MatrixXcd::Identity(kk, kk)).norm() > 1e-10 * std::max(1.0, std::abs(centre))) {
      Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(small, true);
      w = es.eigenvectors();
      vals = es.eigenvalues();
    }
    const Eigen::MatrixXcd rights = rc * w;
    const Eigen::MatrixXcd lefts = lc * gram.adjoint().lu().solve(w.adjoint().lu().solve(Eigen::MatrixXcd::Identity(kk, kk)));
    for (Eigen::Index c = 0; c < kk; ++c) {
      CVector r = rights.col(c);
      CVector l = lefts.col(c);
      normalize_pair(r, l);
      out.push_back({vals(c), std::move(r), std::move(l)});
    }
  }
  return out;
}

}  // namespace detail

// Full set of d^2 eigentriples. The population/coherence split of the Davies
// generator is detected from the matrix and each block is solved separately.
inline SpectralData numerical_spectrum(const Liouvillian& liou, const SpectralOptions& opt = {}) {
  const std::size_t d = liou.dim;
  const std::size_t n2 = d * d;
  std::vector<Eigen::Index> pop, coh;
  for (std::size_t k = 0; k < n2; ++k) (is_population_index(k, d) ? pop : coh).push_back(static_cast<Eigen::Index>(k));

  bool split = true;
  for (auto i : pop)
    for (auto j : coh)
      if (liou.matrix(i, j) != 0.0 || liou.matrix(j, i) != 0.0) split = false;

  std::vector<std::pair<std::vector<Eigen::Index>, Subspace>> blocks;
  if (split) {
    blocks.push_back({pop, Subspace::population});
    if (!coh.empty()) blocks.push_back({coh, Subspace::coherence});
  } else {
    std::vector<Eigen::Index> all(n2);
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    blocks.push_back({all, Subspace::population});
  }

  SpectralData out;
  for (const auto& [idx, tag] : blocks) {
    const auto n = static_cast<Eigen::Index>(idx.size());
    CMatrix block(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b) block(a, b) = liou.matrix(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    for (auto& bt : detail::block_triples(block, opt)) {
      CVector r = CVector::Zero(static_cast<Eigen::Index>(n2));
      CVector l = CVector::Zero(static_cast<Eigen::Index>(n2));
      for (Eigen::Index a = 0; a < n; ++a) {
        r(idx[static_cast<std::size_t>(a)]) = bt.right(a);
        l(idx[static_cast<std::size_t>(a)]) = bt.left(a);
      }
      Subspace t = tag;
      if (!split) {
        double pw = 0.0;
        for (auto i : pop) pw += std::norm(r(i));
        t = pw > 0.5 ? Subspace::population : Subspace::coherence;
      }
      EigenTriple et;
      et.lambda = bt.lambda;
      et.residual = (liou.matrix * r - bt.lambda * r).norm();
      if (et.residual > opt.residual_tol)
        throw ConvergenceError("numerical_spectrum: eigentriple residual above tolerance", et.residual);
      et.right_op = devectorize(r);
      et.left_op = devectorize(l);
      et.subspace_tag = t;
      out.triples.push_back(std::move(et));
    }
  }
  detail::sort_and_summarize(out, opt.zero_tol);
  return out;
}

// Exact eigentriples at zero detuning. Population modes follow the closed-form
// table; coherence modes are the basis operators |a><b| with eigenvalues read off
// the assembled generator (it is diagonal there).
inline SpectralData analytic_spectrum_degenerate(const ProbeSpec& probe, const BathSpec& bath) {
  if (!probe.degenerate()) throw ValidationError("analytic_spectrum_degenerate: detunings must all be zero");
  const std::size_t d = probe.d;
  const double dd = static_cast<double>(d);
  const double nbar = occupation(bath.beta, probe.gap);
  const double g = bath.coupling(probe.gap);
  const Liouvillian liou = build_liouvillian(probe, bath);
  const auto di = static_cast<Eigen::Index>(d);
  const auto n2 = static_cast<Eigen::Index>(d * d);

  SpectralData out;
  auto push = [&](cdouble lambda, CVector r, CVector l, Subspace tag) {
    detail::normalize_pair(r, l);
    EigenTriple et;
    et.lambda = lambda;
    et.residual = (liou.matrix * r - lambda * r).norm();
    et.right_op = devectorize(r);
    et.left_op = devectorize(l);
    et.subspace_tag = tag;
    out.triples.push_back(std::move(et));
  };
  auto diag_index = [&](std::size_t j) { return static_cast<Eigen::Index>(j * d + j); };

  // stationary mode: r ~ tau, l = identity
  push(0.0, vectorize(gibbs_state(probe, bath)), vectorize(identity(d)), Subspace::population);

  // fastest population mode
  {
    CVector r = CVector::Zero(n2), l = CVector::Zero(n2);
    r(diag_index(0)) = std::sqrt((dd - 1.0) / dd);
    l(diag_index(0)) = nbar * std::sqrt(dd - 1.0);
    for (std::size_t j = 1; j < d; ++j) {
      r(diag_index(j)) = -1.0 / std::sqrt(dd * (dd - 1.0));
      l(diag_index(j)) = -(1.0 + nbar) / std::sqrt(dd - 1.0);
    }
    push(-g * (dd * nbar + 1.0), std::move(r), std::move(l), Subspace::population);
  }

  // (d-2)-fold slow population modes spanned by (|1,1>> - |k,k>>)/sqrt2. The
  // generator is symmetric on this block, so an orthonormal basis (Gram-Schmidt
  // in k order, first vector unchanged) serves as both left and right operators.
  if (d >= 3) {
    const Eigen::Index m = di - 2;
    Eigen::MatrixXcd rs = Eigen::MatrixXcd::Zero(n2, m);
    for (Eigen::Index k = 0; k < m; ++k) {
      rs(diag_index(1), k) = 1.0 / std::sqrt(2.0);
      rs(diag_index(static_cast<std::size_t>(k) + 2), k) = -1.0 / std::sqrt(2.0);
      for (Eigen::Index p = 0; p < k; ++p) rs.col(k) -= rs.col(p).dot(rs.col(k)) * rs.col(p);
      rs.col(k).normalize();
    }
    for (Eigen::Index k = 0; k < m; ++k) push(-g * (1.0 + nbar), rs.col(k), rs.col(k), Subspace::population);
  }

  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      if (a == b) continue;
      const auto k = static_cast<Eigen::Index>(a * d + b);
      CVector r = CVector::Zero(n2);
      r(k) = 1.0;
      push(liou.matrix(k, k), r, r, Subspace::coherence);
    }
  detail::sort_and_summarize(out, 1e-9);
  return out;
}

// Ground-excited coherence decay rate: assembled generator versus the two
// closed forms quoted in the literature for this model.
struct CoherenceRateReport {
  double numerical = 0.0;        // |Re lambda| from the generator
  double formula_main = 0.0;     // (2 gamma + gamma n (d+1)) / 2
  double formula_appendix = 0.0; // (gamma n + (d-1) gamma (1+n)) / 2
  double deviation_main = 0.0;
  double deviation_appendix = 0.0;
};

inline CoherenceRateReport coherence_rate_comparison(const ProbeSpec& probe, const BathSpec& bath) {
  const Liouvillian liou = build_liouvillian(probe, bath);
  const double nbar = occupation(bath.beta, probe.gap);
  const double g = bath.coupling(probe.gap);
  const double dd = static_cast<double>(probe.d);
  CoherenceRateReport rep;
  const auto k = static_cast<Eigen::Index>(1 * probe.d + 0);
  rep.numerical = std::abs(liou.matrix(k, k).real());
  rep.formula_main = 0.5 * (2.0 * g + g * nbar * (dd + 1.0));
  rep.formula_appendix = 0.5 * (g * nbar + (dd - 1.0) * g * (1.0 + nbar));
  rep.deviation_main = std::abs(rep.numerical - rep.formula_main);
  rep.deviation_appendix = std::abs(rep.numerical - rep.formula_appendix);
  return rep;
}

inline void validate_density(const CMatrix& rho, double trace_tol = 1e-9) {
  if (rho.rows() != rho.cols()) throw DimensionError("state must be square");
  if (!is_hermitian(rho, 1e-12)) throw ValidationError("state is not Hermitian");
  if (std::abs(rho.trace() - 1.0) > trace_tol) throw ValidationError("state trace differs from 1");
}

// c_i = Tr(l_i^dag rho0).
inline std::vector<cdouble> mode_overlaps(const SpectralData& spec, const CMatrix& rho0) {
  validate_density(rho0);
  std::vector<cdouble> c;
  c.reserve(spec.triples.size());
  for (const auto& t : spec.triples) c.push_back((t.left_op.conjugate().cwiseProduct(rho0)).sum());
  return c;
}

// rho_t = sum_i c_i e^{lambda_i t} r_i (the stationary term included).
inline CMatrix reconstruct(const SpectralData& spec, const std::vector<cdouble>& coeffs, double t) {
  CMatrix out = CMatrix::Zero(spec.triples.front().right_op.rows(), spec.triples.front().right_op.cols());
  for (std::size_t i = 0; i < spec.triples.size(); ++i)
    out += coeffs[i] * std::exp(spec.triples[i].lambda * t) * spec.triples[i].right_op;
  return out;
}

// Indices of the d-2 slowest nonzero population modes (the lower tail the
// ground-state overlap bound speaks about).
inline std::vector<std::size_t> slow_population_modes(const SpectralData& spec, std::size_t d, double zero_tol = 1e-9) {
  std::vector<std::size_t> out;
  if (d < 3) return out;
  for (std::size_t i = 0; i < spec.triples.size() && out.size() < d - 2; ++i) {
    const auto& t = spec.triples[i];
    if (t.subspace_tag == Subspace::population && std::abs(t.lambda) > zero_tol) out.push_back(i);
  }
  return out;
}

// Literal window {0 < |Re lambda| <= (d-1) Lambda_min / 2}; kept for reference.
inline std::vector<std::size_t> lower_tail_window(const SpectralData& spec, std::size_t d, double zero_tol = 1e-9) {
  std::vector<std::size_t> out;
  const double cap = (static_cast<double>(d) - 1.0) * spec.lambda_min_nonzero / 2.0;
  for (std::size_t i = 0; i < spec.triples.size(); ++i) {
    const double r = std::abs(spec.triples[i].lambda.real());
    if (std::abs(spec.triples[i].lambda) > zero_tol && r <= cap) out.push_back(i);
  }
  return out;
}

// epsilon / sqrt(d-1) * |d/dw log(e^{beta w} Gamma_beta(w))| at w = gap.
inline double perturbation_overlap_bound(const ProbeSpec& probe, const BathSpec& bath) {
  if (probe.d < 3) throw NotApplicableError("perturbation_overlap_bound: requires d >= 3");
  return probe.epsilon_max / std::sqrt(static_cast<double>(probe.d) - 1.0) * log_derivative_constant(bath, probe.gap);
}

// max |Tr(l_j^dag |0><0|)| over the slow population modes.
inline double max_slow_overlap_ground(const SpectralData& spec, std::size_t d) {
  const CMatrix ground = basis_op(d, 0, 0);
  const auto c = mode_overlaps(spec, ground);
  double worst = 0.0;
  for (auto i : slow_population_modes(spec, d)) worst = std::max(worst, std::abs(c[i]));
  return worst;
}

}  // namespace qmpe
