#include <gtest/gtest.h>

#include <random>

#include "qmpe/model.hpp"
#include "test_util.hpp"

using namespace qmpe;

namespace {
BathSpec flat(double beta = 1.0, double gamma = 1.0) {
  BathSpec b;
  b.beta = beta;
  b.gamma = gamma;
  return b;
}
BathSpec ohmic(double beta = 1.0, double gamma = 1.0, double ref = 1.0) {
  BathSpec b = flat(beta, gamma);
  b.density = {SpectralKind::ohmic, ref};
  return b;
}
}  // namespace

TEST(Rate, FlatSubstitution) {
  EXPECT_NEAR(rate(flat(), 1.0), 0.5819767068693265, 1e-15);
  EXPECT_NEAR(rate(flat(1.0, 2.5), 1.0), 2.5 * 0.5819767068693265, 1e-14);
  EXPECT_THROW(rate(flat(), 0.0), DomainError);
}

TEST(Rate, DetailedBalanceRatio) {
  for (double w : {0.3, 1.0, 2.7})
    for (const auto& b : {flat(0.5), flat(2.0), ohmic(1.3)})
      EXPECT_NEAR(rate(b, w) / rate(b, -w), std::exp(-b.beta * w), 1e-14);
}

TEST(Rate, FreezesOutAtLowTemperature) {
  EXPECT_LT(rate(flat(800.0), 1.0), 1e-300);
  EXPECT_NEAR(rate(flat(800.0), -1.0), 1.0, 1e-15);
}

TEST(RateDerivative, Substitution) {
  EXPECT_NEAR(rate_beta_derivative(flat(), 1.0), -std::exp(1.0) / std::pow(std::exp(1.0) - 1.0, 2), 1e-15);
  EXPECT_NEAR(rate_beta_derivative(flat(), 1.0), -0.9206735942077924, 1e-14);
  EXPECT_THROW(rate_beta_derivative(flat(), 0.0), DomainError);
}

TEST(RateDerivative, NegativeForPositiveFrequencies) {
  for (double beta : {0.1, 1.0, 5.0})
    for (double w : {0.01, 0.5, 3.0}) EXPECT_LT(rate_beta_derivative(flat(beta), w), 0.0);
}

// central-difference oracle, step 1e-5
TEST(RateDerivative, MatchesFiniteDifference) {
  const double h = 1e-5;
  for (const auto& b : {flat(0.7), ohmic(0.7, 1.0, 2.0)})
    for (double w : {1.3, -1.3}) {
      const double fd = (rate(b.at_beta(b.beta + h), w) - rate(b.at_beta(b.beta - h), w)) / (2 * h);
      EXPECT_NEAR(rate_beta_derivative(b, w), fd, 1e-6 * std::abs(fd));
    }
}

TEST(Rate, OptimalFrequencyGridSearch) {
  // |dGamma/dbeta| = w e^{w}/(e^{w}-1)^2 for flat J at beta = 1 is maximal at w -> 0 on a grid
  const double w = optimal_frequency(flat());
  EXPECT_NEAR(w, 10.0 / 400.0, 1e-12);
  const auto b = ohmic();
  const double wo = optimal_frequency(b);
  for (int k = 1; k <= 400; k += 7)
    EXPECT_GE(std::abs(rate_beta_derivative(b, wo)), std::abs(rate_beta_derivative(b, 0.025 * k)) - 1e-12);
}

TEST(Liouvillian, TwoLevelPopulationBlock) {
  const auto probe = ProbeSpec::ramp(2, 1.0, 0.0);
  const auto bath = flat();
  const auto l = build_liouvillian(probe, bath);
  const double n = occupation(1.0, 1.0);
  // indices |0,0>> = 0 and |1,1>> = 3
  EXPECT_NEAR(std::abs(l.matrix(0, 0) - (-n)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(l.matrix(0, 3) - (1 + n)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(l.matrix(3, 0) - n), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(l.matrix(3, 3) - (-(1 + n))), 0.0, 1e-15);
}

TEST(Liouvillian, TracePreservationAndDecomposition) {
  for (std::size_t d : {2u, 3u, 6u}) {
    const auto probe = ProbeSpec::ramp(d, 1.0, 0.05);
    const auto l = build_liouvillian(probe, flat());
    const CVector idv = vectorize(identity(d));
    EXPECT_LE((idv.adjoint() * l.matrix).norm(), 1e-12);
    EXPECT_EQ(l.matrix, l.hamiltonian_part + l.dissipative_part);
  }
}

TEST(Liouvillian, PopulationCoherenceDecoupling) {
  const std::size_t d = 5;
  const auto l = build_liouvillian(ProbeSpec::ramp(d, 1.0, 0.05), flat());
  for (std::size_t i = 0; i < d * d; ++i)
    for (std::size_t j = 0; j < d * d; ++j)
      if (is_population_index(i, d) != is_population_index(j, d))
        EXPECT_EQ(l.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), 0.0);
}

TEST(Liouvillian, PreservesHermiticity) {
  std::mt19937_64 rng(9);
  const std::size_t d = 4;
  const auto l = build_liouvillian(ProbeSpec::ramp(d, 1.0, 0.1), ohmic());
  for (int k = 0; k < 10; ++k) {
    const CMatrix rho = qmpe::testing::random_hermitian(rng, d);
    const CMatrix out = l.apply(rho);
    EXPECT_LE((out - out.adjoint()).norm(), 1e-12);
  }
}

TEST(Liouvillian, ThreeLevelDegenerateEigenvalues) {
  const auto l = build_liouvillian(ProbeSpec::ramp(3, 1.0, 0.0), flat());
  const auto pairs = eig_general(l.matrix);
  int zero = 0, slow = 0, fast = 0;
  for (const auto& p : pairs) {
    if (std::abs(p.value) < 1e-9) ++zero;
    if (std::abs(p.value - (-1.5819767068693265)) < 1e-9) ++slow;
    if (std::abs(p.value - (-2.7459301206079795)) < 1e-9) ++fast;
  }
  EXPECT_EQ(zero, 1);
  EXPECT_GE(slow, 3);  // one population mode + two excited-excited coherences
  EXPECT_EQ(fast, 1);
}

TEST(Liouvillian, UniqueStationaryPopulationMode) {
  for (std::size_t d : {2u, 4u, 7u}) {
    const auto l = build_liouvillian(ProbeSpec::ramp(d, 1.0, 0.0), flat());
    CMatrix pop(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        pop(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            l.matrix(static_cast<Eigen::Index>(i * d + i), static_cast<Eigen::Index>(j * d + j));
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(pop);
    EXPECT_EQ(lu.dimensionOfKernel(), 1);
  }
}

TEST(Liouvillian, BetaDerivativeMatchesFiniteDifference) {
  const double h = 1e-4;
  for (const auto& b : {flat(1.0), ohmic(0.8, 1.5, 1.0)}) {
    const auto probe = ProbeSpec::ramp(4, 1.0, 0.05);
    const auto l = build_liouvillian(probe, b);
    const auto lp = build_liouvillian(probe, b.at_beta(b.beta + h));
    const auto lm = build_liouvillian(probe, b.at_beta(b.beta - h));
    const CMatrix fd = (lp.matrix - lm.matrix) / (2 * h);
    EXPECT_LE((fd - l.beta_derivative).cwiseAbs().maxCoeff(), 1e-6);  // O(h^2)
  }
}

TEST(Gibbs, Substitution) {
  const auto tau = gibbs_state(ProbeSpec::ramp(3, 1.0, 0.0), flat());
  EXPECT_NEAR(tau(0, 0).real(), 0.5761168847658291, 1e-12);
  EXPECT_NEAR(tau(1, 1).real(), 0.21194155761708544, 1e-12);
  EXPECT_NEAR(tau(2, 2).real(), 0.21194155761708544, 1e-12);
  EXPECT_NEAR(tau.trace().real(), 1.0, 1e-15);
}

TEST(Gibbs, InfiniteTemperatureLimit) {
  const auto tau = gibbs_state(ProbeSpec::ramp(5, 1.0, 0.1), flat(1e-8));
  EXPECT_LE((tau - identity(5) / 5.0).norm(), 1e-7);
}

TEST(Gibbs, FixedPointOfGenerator) {
  for (std::size_t d : {2u, 3u, 10u})
    for (double eps : {0.0, 0.05}) {
      const auto probe = ProbeSpec::ramp(d, 1.0, eps);
      for (const auto& b : {flat(), ohmic()}) {
        const auto l = build_liouvillian(probe, b);
        EXPECT_LE(l.apply(gibbs_state(probe, b)).norm(), 1e-10);
      }
    }
}

TEST(Kms, AlgebraicIdentity) {
  const auto probe = ProbeSpec::ramp(3, 1.0, 0.0);
  EXPECT_LE(kms_check(probe, flat(), {0.5, 1.0, 2.0}), 1e-12);
  EXPECT_LE(kms_check(probe, ohmic(), {0.5, 1.0, 2.0}), 1e-12);
  EXPECT_THROW(kms_check(probe, flat(), {0.0}), DomainError);
}

TEST(ProbeSpec, RampAndValidation) {
  const auto p = ProbeSpec::ramp(5, 1.0, 0.1);
  ASSERT_EQ(p.detunings.size(), 4u);
  EXPECT_NEAR(p.detunings.front(), -0.1 * 3.0 / 3.0, 1e-15);
  EXPECT_NEAR(p.detunings.back(), 0.1, 1e-15);
  for (double e : p.detunings) EXPECT_LE(std::abs(e), 0.1 + 1e-15);
  EXPECT_EQ(ProbeSpec::ramp(2, 1.0, 0.3).detunings, std::vector<double>{0.0});
  EXPECT_THROW(ProbeSpec::ramp(1, 1.0, 0.0), ValidationError);
  EXPECT_THROW(ProbeSpec::with_detunings(1.0, {0.2}, 0.1), ValidationError);
  EXPECT_THROW(ProbeSpec::with_detunings(0.1, {-0.2}, 0.3), ValidationError);
  BathSpec bad = flat(-1.0);
  EXPECT_THROW(bad.validate(), ValidationError);
}
