#pragma once

// Haar-random reference states (1 - alpha) tau + alpha |sigma><sigma|, the
// excited-manifold weight statistic f, and the empirical exceedance frequency of
// the ground state against such references.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qmpe/mpemba.hpp"
#include "qmpe/parallel.hpp"
#include "qmpe/random.hpp"

namespace qmpe {

// sum over i != j, both excited, of |psi_i|^2 |psi_j|^2.
inline double f_statistic(const CVector& psi) {
  if (std::abs(psi.squaredNorm() - 1.0) > 1e-10) throw ValidationError("f_statistic: psi must have unit norm");
  double s = 0.0, s2 = 0.0;
  for (Eigen::Index i = 1; i < psi.size(); ++i) {
    const double p = std::norm(psi(i));
    s += p;
    s2 += p * p;
  }
  return std::max(0.0, s * s - s2);
}

struct LipschitzReport {
  double max_ratio = 0.0;
  std::size_t pairs = 0;
  std::size_t skipped = 0;  // coincident pairs
  bool within_bound = true;
  std::optional<std::pair<CVector, CVector>> counterexample;
};

inline constexpr double kLipschitzBound = 2.8284271247461903;  // 2 sqrt 2

// Even pairs are independent Haar draws; odd pairs are a draw and a small
// perturbation of it, which probes the local slope.
inline LipschitzReport lipschitz_check(std::size_t n_pairs, std::size_t d, std::uint64_t seed, double tol = 1e-9) {
  LipschitzReport rep;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    auto rng = substream(seed, k);
    const CVector psi = haar_pure_state(d, rng);
    CVector phi = haar_pure_state(d, rng);
    if (k % 2 == 1) {
      phi = psi + 1e-3 * phi;
      phi /= phi.norm();
    }
    const double dist = (psi - phi).norm();
    ++rep.pairs;
    if (dist <= 1e-14) {
      ++rep.skipped;
      continue;
    }
    const double ratio = std::abs(f_statistic(psi) - f_statistic(phi)) / dist;
    if (ratio > rep.max_ratio) rep.max_ratio = ratio;
    if (ratio > kLipschitzBound + tol && rep.within_bound) {
      rep.within_bound = false;
      rep.counterexample = std::make_pair(psi, phi);
    }
  }
  return rep;
}

struct MCConfig {
  std::size_t n_samples = 100;
  double alpha = 0.2;
  std::uint64_t seed = 0;
  std::size_t parallel_width = 1;
  double tail_band_width = 0.1;

  void validate() const {
    if (n_samples < 1) throw ValidationError("MCConfig: n_samples must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("MCConfig: alpha must lie in (0, 1]");
  }
};

struct MCSample {
  std::uint64_t index = 0;
  double f = 0.0;
  ExceedanceReport report;
};

struct MCReport {
  std::size_t exceed_count = 0;
  std::size_t n = 0;  // conclusive samples
  std::size_t n_samples = 0;
  std::size_t inconclusive = 0;
  double frequency = 0.0;
  std::pair<double, double> wilson_ci95{0.0, 1.0};
  double mean_f = 0.0;
  double se_f = 0.0;
  double mu_d = 0.0;
  double delta_bound = 0.0;
  double theta = 0.0;
  double g = 0.0;
  double lambda_min = 0.0;
  std::vector<MCSample> samples;  // index order
};

inline std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
  const double half = z / (1.0 + z2 / nn) * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// For each sample i: sigma from substream (seed, i), reference (1 - alpha) tau + alpha sigma,
// both it and |0><0| evolved on the shared grid, then detect_exceeding(ground, reference).
// The grid is t = 0 plus 200 log points on [1e-3 / Lambda_min, t_max], t_max defaulting to 10 / Lambda_min.
inline MCReport run_exceedance_experiment(const ProbeSpec& probe, const BathSpec& bath, const MCConfig& mc,
                                          std::optional<double> t_max = std::nullopt) {
  mc.validate();
  const std::size_t d = probe.d;
  const auto liou = build_liouvillian(probe, bath);
  const auto spec = numerical_spectrum(liou);
  const CMatrix tau = gibbs_state(probe, bath);
  const double lm = spec.lambda_min_nonzero;
  const double hi = t_max ? *t_max * lm : 10.0;
  const GridPropagator prop(liou.matrix, TimeGrid::log_default(lm, 200, 1e-3, hi));

  auto star = evolve_on_grid(prop, tau, ProbeState::ground(d));
  star.tail_amplitude = tail_band_amplitude(spec, basis_op(d, 0, 0), mc.tail_band_width);

  MCReport rep;
  rep.lambda_min = lm;
  rep.n_samples = mc.n_samples;
  rep.samples = parallel_map(mc.n_samples, mc.parallel_width, [&](std::size_t i) {
    MCSample s;
    s.index = i;
    const CVector sigma = haar_pure_state(d, mc.seed, i);
    s.f = f_statistic(sigma);
    CMatrix ref = (1.0 - mc.alpha) * tau + mc.alpha * (sigma * sigma.adjoint());
    ref = 0.5 * (ref + ref.adjoint());
    ref /= ref.trace().real();
    auto tr = evolve_on_grid(prop, tau, ProbeState::make(ref, "reference"));
    tr.tail_amplitude = tail_band_amplitude(spec, ref, mc.tail_band_width);
    s.report = detect_exceeding(star, tr);
    return s;
  });

  double sum_f = 0.0, sum_f2 = 0.0;
  for (const auto& s : rep.samples) {
    if (s.report.inconclusive)
      ++rep.inconclusive;
    else if (s.report.exceeds)
      ++rep.exceed_count;
    sum_f += s.f;
    sum_f2 += s.f * s.f;
  }
  const double n = static_cast<double>(mc.n_samples);
  rep.n = mc.n_samples - rep.inconclusive;
  rep.frequency = rep.n ? static_cast<double>(rep.exceed_count) / static_cast<double>(rep.n) : 0.0;
  rep.wilson_ci95 = wilson_interval(rep.exceed_count, rep.n);
  rep.mean_f = sum_f / n;
  rep.se_f = mc.n_samples > 1 ? std::sqrt(std::max(0.0, (sum_f2 - n * rep.mean_f * rep.mean_f) / (n - 1.0)) / n) : 0.0;

  TheoremBoundInputs in;
  in.alpha = mc.alpha;
  in.epsilon = probe.epsilon_max;
  in.g = log_derivative_constant(bath, probe.gap);
  in.d = d;
  rep.mu_d = in.mu_d();
  rep.theta = in.theta();
  rep.g = in.g;
  rep.delta_bound = theorem1_delta(in);
  return rep;
}

// Ranks starting at 1, ties share their mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double mean = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = mean;
    i = j + 1;
  }
  return r;
}

// Pearson correlation of the average ranks.
inline double spearman_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DimensionError("spearman_correlation: need two equal-length samples");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

struct SensitivityPoint {
  std::string label;
  double rate = 0.0;
  double value = 0.0;  // ||d rho_dt / d beta||_1
  bool roundoff_warning = false;
};

struct SensitivityScanConfig {
  std::size_t n_states = 200;
  double dt = 0.1;
  double dbeta = 0.0;        // 0 -> 1e-4 beta
  double fit_window = 0.0;   // 0 -> 1 / gamma
  std::size_t fit_points = 101;
  std::uint64_t seed = 0;
  std::size_t parallel_width = 1;
};

struct SensitivityScan {
  SensitivityPoint ground;
  std::vector<SensitivityPoint> haar;  // index order
  bool ground_is_strict_max = true;
  double spearman = 0.0;               // fitted rate vs value over the Haar states
  std::size_t roundoff_warnings = 0;
};

// Finite-time sensitivity against fitted convergence rate for |0> and n Haar pure states.
inline SensitivityScan sensitivity_scan(const ProbeSpec& probe, const BathSpec& bath, const SensitivityScanConfig& cfg) {
  if (cfg.n_states < 2) throw ValidationError("sensitivity_scan: need at least two Haar states");
  const double window = cfg.fit_window > 0.0 ? cfg.fit_window : 1.0 / bath.gamma;
  const auto liou = build_liouvillian(probe, bath);
  const CMatrix tau = gibbs_state(probe, bath);
  const FiniteTimeSensitivity ft(probe, bath, cfg.dt, cfg.dbeta);
  const GridPropagator prop(liou.matrix, TimeGrid::uniform(window, cfg.fit_points));
  auto score = [&](const ProbeState& st) {
    SensitivityPoint p;
    p.label = st.label;
    p.rate = fit_convergence_rate(evolve_on_grid(prop, tau, st), window).rate;
    const auto r = ft.evaluate(st);
    p.value = r.value;
    p.roundoff_warning = r.roundoff_warning;
    return p;
  };
  SensitivityScan out;
  out.ground = score(ProbeState::ground(probe.d));
  out.haar = parallel_map(cfg.n_states, cfg.parallel_width,
                          [&](std::size_t i) { return score(ProbeState::haar(probe.d, cfg.seed, i)); });
  std::vector<double> rates, values;
  out.roundoff_warnings = out.ground.roundoff_warning;
  for (const auto& p : out.haar) {
    rates.push_back(p.rate);
    values.push_back(p.value);
    if (!(out.ground.value > p.value)) out.ground_is_strict_max = false;
    out.roundoff_warnings += p.roundoff_warning;
  }
  out.spearman = spearman_correlation(rates, values);
  return out;
}

}  // namespace qmpe
