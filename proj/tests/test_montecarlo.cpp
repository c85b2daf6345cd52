#include <gtest/gtest.h>

#include <algorithm>

#include "qmpe/montecarlo.hpp"

using namespace qmpe;

namespace {
// two-sample Kolmogorov-Smirnov p-value (asymptotic)
double ks_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double dmax = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    dmax = std::max(dmax, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  const double ne = double(a.size()) * b.size() / (a.size() + b.size());
  const double lam = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * dmax;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2 * (k % 2 ? 1 : -1) * std::exp(-2.0 * k * k * lam * lam);
  return std::clamp(p, 0.0, 1.0);
}
}  // namespace

TEST(Substreams, DeterministicAndDistinct) {
  EXPECT_EQ(substream_seed(1, 2), substream_seed(1, 2));
  EXPECT_NE(substream_seed(1, 2), substream_seed(1, 3));
  EXPECT_NE(substream_seed(1, 2), substream_seed(2, 2));
  const CVector a = haar_pure_state(5, 9, 4), b = haar_pure_state(5, 9, 4);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, haar_pure_state(5, 9, 5));
}

TEST(Haar, UnitNorm) {
  for (std::uint64_t i = 0; i < 200; ++i) EXPECT_NEAR(haar_pure_state(1 + i % 12, 3, i).norm(), 1.0, 1e-12);
}

TEST(Haar, SecondAndFourthMoments) {
  const std::size_t d = 4, n = 100000;
  double m2 = 0, m2sq = 0, m4 = 0, m4sq = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const CVector v = haar_pure_state(d, 77, k);
    const double a = std::norm(v(0)), b = std::norm(v(1));
    m2 += a;
    m2sq += a * a;
    m4 += a * b;
    m4sq += a * b * a * b;
  }
  const double mean2 = m2 / n, se2 = std::sqrt((m2sq / n - mean2 * mean2) / n);
  const double mean4 = m4 / n, se4 = std::sqrt((m4sq / n - mean4 * mean4) / n);
  EXPECT_NEAR(mean2, 1.0 / d, 4 * se2);
  EXPECT_NEAR(mean4, 1.0 / (d * (d + 1)), 4 * se4);
}

TEST(FStatistic, Examples) {
  CVector ground = CVector::Zero(3);
  ground(0) = 1.0;
  EXPECT_EQ(f_statistic(ground), 0.0);
  CVector v(3);
  v << 0.0, 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  EXPECT_NEAR(f_statistic(v), 0.5, 1e-15);
  EXPECT_THROW(f_statistic(2.0 * v), ValidationError);
  EXPECT_EQ(f_statistic(-v), f_statistic(v));
}

TEST(FStatistic, HaarMeanMatchesMu) {
  for (std::size_t d : {3u, 10u}) {
    const std::size_t n = 10000;
    double s = 0, s2 = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double f = f_statistic(haar_pure_state(d, 5, k));
      s += f;
      s2 += f * f;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_NEAR(mean, (TheoremBoundInputs{0.2, 0, 0, d}).mu_d(), 3 * se);
  }
}

TEST(FStatistic, PhaseUnitaryLeavesDistributionUnchanged) {
  const std::size_t d = 5, n = 10000;
  CVector phases(d);
  for (std::size_t j = 0; j < d; ++j) phases(j) = std::polar(1.0, 0.7 * j + 0.3);
  std::vector<double> a, b;
  for (std::size_t k = 0; k < n; ++k) {
    a.push_back(f_statistic(haar_pure_state(d, 1, k)));
    b.push_back(f_statistic(phases.cwiseProduct(haar_pure_state(d, 2, k))));
  }
  EXPECT_GT(ks_pvalue(a, b), 0.01);
}

TEST(Lipschitz, BoundHoldsAndIdenticalPairsSkip) {
  const auto rep = lipschitz_check(20000, 5, 13);
  EXPECT_TRUE(rep.within_bound);
  EXPECT_LE(rep.max_ratio, kLipschitzBound + 1e-9);
  EXPECT_GT(rep.max_ratio, 0.1);
  EXPECT_EQ(rep.pairs, 20000u);
  EXPECT_EQ(rep.skipped, 0u);
  const auto loose = lipschitz_check(200, 5, 13, -kLipschitzBound);  // any positive ratio is flagged
  EXPECT_FALSE(loose.within_bound);
  EXPECT_TRUE(loose.counterexample.has_value());
}

TEST(Wilson, ContainsFrequency) {
  for (std::size_t n : {1u, 10u, 100u})
    for (std::size_t k = 0; k <= n; k += std::max<std::size_t>(1, n / 5)) {
      const auto [lo, hi] = wilson_interval(k, n);
      const double p = double(k) / n;
      EXPECT_LE(lo, p + 1e-15);
      EXPECT_GE(hi, p - 1e-15);
    }
  const auto [lo, hi] = wilson_interval(50, 100);
  EXPECT_NEAR(lo, 0.40383153, 1e-6);
  EXPECT_NEAR(hi, 0.59616847, 1e-6);
}

TEST(Experiment, TwoLevelAlwaysExceeds) {
  MCConfig mc;
  mc.n_samples = 50;
  mc.seed = 3;
  const auto rep = run_exceedance_experiment(ProbeSpec::ramp(2, 1.0, 0.0), BathSpec{}, mc);
  EXPECT_EQ(rep.exceed_count, 50u);
  EXPECT_EQ(rep.frequency, 1.0);
  EXPECT_EQ(rep.delta_bound, 0.0);
  EXPECT_EQ(rep.inconclusive, 0u);
}

TEST(Experiment, ReportInvariantsAndWidthIndependence) {
  MCConfig mc;
  mc.n_samples = 12;
  mc.seed = 99;
  const auto p = ProbeSpec::ramp(5, 1.0, 0.05);
  const auto a = run_exceedance_experiment(p, BathSpec{}, mc);
  mc.parallel_width = 3;
  const auto b = run_exceedance_experiment(p, BathSpec{}, mc);
  EXPECT_EQ(a.exceed_count, b.exceed_count);
  EXPECT_EQ(a.mean_f, b.mean_f);
  EXPECT_EQ(a.se_f, b.se_f);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].f, b.samples[i].f);
    EXPECT_EQ(a.samples[i].report.t_prime, b.samples[i].report.t_prime);
  }
  EXPECT_EQ(a.frequency, double(a.exceed_count) / a.n);
  EXPECT_LE(a.wilson_ci95.first, a.frequency);
  EXPECT_GE(a.wilson_ci95.second, a.frequency);
  EXPECT_NEAR(a.mu_d, 12.0 / 30.0, 1e-15);
  EXPECT_GE(a.frequency, 1 - std::min(1.0, a.delta_bound) - 3 * std::sqrt(a.frequency * (1 - a.frequency) / a.n));
}

TEST(Experiment, RejectsBadConfig) {
  MCConfig mc;
  mc.n_samples = 0;
  EXPECT_THROW(run_exceedance_experiment(ProbeSpec::ramp(3, 1.0, 0.0), BathSpec{}, mc), ValidationError);
  mc.n_samples = 1;
  mc.alpha = 0.0;
  EXPECT_THROW(run_exceedance_experiment(ProbeSpec::ramp(3, 1.0, 0.0), BathSpec{}, mc), ValidationError);
}

TEST(Spearman, TiesAndOracle) {
  EXPECT_EQ(average_ranks({3.0, 1.0, 3.0, 2.0}), (std::vector<double>{3.5, 1.0, 3.5, 2.0}));
  // scipy.stats.spearmanr on the same data
  EXPECT_NEAR(spearman_correlation({1, 2, 2, 5, 3.5, 0.1}, {3, 1, 4, 1, 5, 9}), -0.4852941176470589, 1e-12);
  EXPECT_NEAR(spearman_correlation({1, 2, 3}, {10, 20, 30}), 1.0, 1e-15);
  EXPECT_THROW(spearman_correlation({1}, {1}), DimensionError);
}
