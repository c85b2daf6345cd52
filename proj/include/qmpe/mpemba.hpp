#pragma once

// Relaxation trajectories toward the Gibbs state, the "exceeds in thermalization"
// predicate, log-linear rate fits, the ground-state convergence bound and the
// concentration bound on the exceedance probability.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qmpe/csv.hpp"
#include "qmpe/spectral.hpp"
#include "qmpe/thermometry.hpp"

namespace qmpe {

struct TimeGrid {
  std::vector<double> times;

  static TimeGrid uniform(double t_max, std::size_t n_points) {
    if (!(t_max > 0.0)) throw DomainError("TimeGrid: t_max must be > 0");
    if (n_points < 2) throw ValidationError("TimeGrid: need at least 2 points");
    TimeGrid g;
    g.times.resize(n_points);
    for (std::size_t k = 0; k < n_points; ++k)
      g.times[k] = t_max * static_cast<double>(k) / static_cast<double>(n_points - 1);
    return g;
  }

  // t = 0 followed by n log-spaced points on [lo, hi] / lambda_min.
  static TimeGrid log_default(double lambda_min, std::size_t n = 200, double lo = 1e-3, double hi = 10.0) {
    if (!(lambda_min > 0.0)) throw DomainError("TimeGrid: lambda_min must be > 0");
    if (n < 2 || !(lo > 0.0) || !(hi > lo)) throw ValidationError("TimeGrid: bad log grid");
    TimeGrid g;
    g.times.reserve(n + 1);
    g.times.push_back(0.0);
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t k = 0; k < n; ++k)
      g.times.push_back(std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1)) / lambda_min);
    return g;
  }

  void validate() const {
    if (times.size() < 2) throw ValidationError("TimeGrid: need at least 2 points");
    if (times.front() < 0.0) throw DomainError("TimeGrid: negative time");
    for (std::size_t k = 1; k < times.size(); ++k)
      if (!(times[k] > times[k - 1])) throw ValidationError("TimeGrid: times must increase strictly");
  }
};

// exp(L dt_k) for every step of a fixed grid, built once and shared by all
// initial states evolved on that grid.
class GridPropagator {
 public:
  GridPropagator(const CMatrix& generator, TimeGrid grid) : grid_(std::move(grid)) {
    grid_.validate();
    std::map<double, std::size_t> seen;
    auto slot = [&](double dt) {
      auto [it, fresh] = seen.emplace(dt, steps_.size());
      if (fresh) steps_.push_back(expm(generator * dt));
      return it->second;
    };
    if (grid_.times.front() > 0.0) index_.push_back(slot(grid_.times.front()));
    for (std::size_t k = 1; k < grid_.times.size(); ++k) index_.push_back(slot(grid_.times[k] - grid_.times[k - 1]));
  }

  const TimeGrid& grid() const { return grid_; }

  std::vector<CMatrix> evolve(const CMatrix& rho0) const {
    std::vector<CMatrix> out;
    out.reserve(grid_.times.size());
    CVector v = vectorize(rho0);
    std::size_t s = 0;
    if (grid_.times.front() > 0.0) v = steps_[index_[s++]] * v;
    out.push_back(devectorize(v));
    while (s < index_.size()) {
      v = steps_[index_[s++]] * v;
      out.push_back(devectorize(v));
    }
    return out;
  }

 private:
  TimeGrid grid_;
  std::vector<CMatrix> steps_;
  std::vector<std::size_t> index_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<double> frobenius;  // ||rho_t - tau||_F
  std::vector<double> trace;      // ||rho_t - tau||_1 / 2
  std::string label;
  std::optional<double> tail_amplitude;  // see tail_band_amplitude
};

inline Trajectory trajectory_from_states(const std::vector<double>& times, const std::vector<CMatrix>& states,
                                         const CMatrix& tau, std::string label) {
  Trajectory tr;
  tr.times = times;
  tr.label = std::move(label);
  tr.frobenius.reserve(states.size());
  tr.trace.reserve(states.size());
  for (const auto& rho : states) {
    const CMatrix diff = rho - tau;
    tr.frobenius.push_back(diff.norm());
    tr.trace.push_back(0.5 * trace_norm(0.5 * (diff + diff.adjoint())));
  }
  return tr;
}

inline Trajectory evolve_on_grid(const GridPropagator& prop, const CMatrix& tau, const ProbeState& rho0) {
  rho0.validate();
  return trajectory_from_states(prop.grid().times, prop.evolve(rho0.matrix), tau, rho0.label);
}

// Uniform grid on [0, t_max]; each point is propagated from the previous one.
inline Trajectory evolve_trajectory(const Liouvillian& liou, const ProbeState& rho0, double t_max, std::size_t n_points,
                                    const CMatrix& tau) {
  rho0.validate();
  const auto grid = TimeGrid::uniform(t_max, n_points);
  std::vector<CMatrix> states;
  states.reserve(n_points);
  CVector v = vectorize(rho0.matrix);
  states.push_back(rho0.matrix);
  for (std::size_t k = 1; k < n_points; ++k) {
    v = expm_action(liou.matrix, v, grid.times[k] - grid.times[k - 1]);
    states.push_back(devectorize(v));
  }
  return trajectory_from_states(grid.times, states, tau, rho0.label);
}

// Largest |frobenius(t) - ||reconstruct(t) - tau||_F| over the trajectory.
inline double mode_expansion_deviation(const Trajectory& tr, const SpectralData& spec, const ProbeState& rho0,
                                       const CMatrix& tau) {
  const auto c = mode_overlaps(spec, rho0.matrix);
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.times.size(); ++k)
    worst = std::max(worst, std::abs(tr.frobenius[k] - (reconstruct(spec, c, tr.times[k]) - tau).norm()));
  return worst;
}

// ||sum_{i in band} c_i r_i||_F over modes with Lambda_min <= |Re lambda_i| <= (1 + width) Lambda_min.
// This component sets the t -> infinity behaviour of the distance.
inline double tail_band_amplitude(const SpectralData& spec, const CMatrix& rho0, double width = 0.1) {
  const auto c = mode_overlaps(spec, rho0);
  const double lo = spec.lambda_min_nonzero * (1.0 - 1e-9), hi = spec.lambda_min_nonzero * (1.0 + width);
  CMatrix acc = CMatrix::Zero(rho0.rows(), rho0.cols());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double r = std::abs(spec.triples[i].lambda.real());
    if (r >= lo && r <= hi) acc += c[i] * spec.triples[i].right_op;
  }
  return acc.norm();
}

enum class TailMethod { grid, mode_coefficient };

inline const char* to_string(TailMethod m) { return m == TailMethod::grid ? "grid" : "mode-coefficient"; }

struct ExceedanceReport {
  bool exceeds = false;
  bool inconclusive = false;
  std::optional<double> t_prime;  // first grid time after which d1 <= d2 holds on the rest of the grid
  TailMethod method = TailMethod::grid;
  std::string detail;
};

// Does trajectory 1 exceed trajectory 2 (Frobenius distance)?
inline ExceedanceReport detect_exceeding(const Trajectory& one, const Trajectory& two, double grid_tol = 1e-12,
                                         double tie_tol = 1e-9) {
  if (one.times != two.times) throw ValidationError("detect_exceeding: time grids differ");
  if (one.times.empty()) throw ValidationError("detect_exceeding: empty trajectory");
  const std::size_t n = one.times.size();
  std::optional<std::size_t> last_bad;
  bool identical = true;
  for (std::size_t k = 0; k < n; ++k) {
    if (one.frobenius[k] > two.frobenius[k] + grid_tol) last_bad = k;
    if (one.frobenius[k] != two.frobenius[k]) identical = false;
  }
  ExceedanceReport rep;
  if (!last_bad)
    rep.t_prime = one.times.front();
  else if (*last_bad + 1 < n)
    rep.t_prime = one.times[*last_bad + 1];
  const bool grid_ok = rep.t_prime.has_value();

  if (!one.tail_amplitude || !two.tail_amplitude) {
    rep.method = TailMethod::grid;
    rep.exceeds = grid_ok;
    rep.detail = grid_ok ? "ordered on the grid tail" : "trajectory 1 above trajectory 2 at the last grid point";
    return rep;
  }

  rep.method = TailMethod::mode_coefficient;
  const double a1 = *one.tail_amplitude, a2 = *two.tail_amplitude;
  const std::string amps = "tail amplitudes " + csv::num(a1) + " vs " + csv::num(a2);
  if (identical) {
    rep.exceeds = true;
    rep.detail = "identical trajectories";
  } else if (a1 < a2 - tie_tol) {
    rep.exceeds = grid_ok;
    rep.detail = amps + (grid_ok ? "" : "; grid tail not yet ordered");
  } else if (a1 > a2 + tie_tol) {
    rep.exceeds = false;
    rep.detail = amps + "; trajectory 1 decays slower asymptotically";
  } else {
    const double last_gap = two.frobenius.back() - one.frobenius.back();
    const bool grid_decided = std::abs(last_gap) > grid_tol + tie_tol * two.frobenius.back();
    if (grid_decided) {
      rep.exceeds = grid_ok;
      rep.detail = amps + " tie; grid decides";
    } else {
      rep.inconclusive = true;
      rep.exceeds = false;
      rep.detail = amps + " tie and grid undecided";
    }
  }
  return rep;
}

struct RateFit {
  double rate = 0.0;  // minus the OLS slope of log distance on t
  double intercept = 0.0;
  std::size_t points_used = 0;
  bool truncated = false;  // underflowed distances dropped from the window
};

inline RateFit fit_convergence_rate(const Trajectory& tr, double window_end, double floor = 1e-14) {
  std::vector<double> xs, ys;
  RateFit fit;
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    if (tr.times[k] > window_end * (1.0 + 1e-12)) break;
    if (!(tr.frobenius[k] > floor)) {
      fit.truncated = true;
      break;
    }
    xs.push_back(tr.times[k]);
    ys.push_back(std::log(tr.frobenius[k]));
  }
  if (xs.size() < 2) throw DomainError("fit_convergence_rate: fewer than two usable points in the window");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
  }
  const double slope = sxy / sxx;
  fit.rate = -slope;
  fit.intercept = my - slope * mx;
  fit.points_used = xs.size();
  return fit;
}

// Right-hand side of the ground-state convergence bound:
// (11/10) eps^2 e^{-2 Lambda_min t} (d-2)/(d-1) g^2.
inline double convergence_bound_rhs(std::size_t d, double epsilon, double g, double lambda_min, double t) {
  return 1.1 * epsilon * epsilon * std::exp(-2.0 * lambda_min * t) * (static_cast<double>(d) - 2.0) /
         (static_cast<double>(d) - 1.0) * g * g;
}

struct ConvergenceBoundReport {
  std::optional<double> t_prime;
  std::size_t violations = 0;   // on the refined grid over [t_prime, t_end]
  std::size_t refined_points = 0;
  double lambda_min = 0.0;
  double g = 0.0;
  double t_end = 0.0;
  std::vector<std::array<double, 3>> margin;  // (t, lhs, rhs) on the scan grid
};

// Evolves |0><0| and compares ||rho_t - tau||_F^2 with the bound on the grid up to
// 10 / Lambda_min; t_prime is the earliest grid time after which every later point
// holds. The inequality is then re-checked on a grid four times denser on [t_prime, t_end].
inline ConvergenceBoundReport lemma4_bound_check(const ProbeSpec& probe, const BathSpec& bath,
                                                 std::optional<TimeGrid> scan = std::nullopt) {
  if (probe.d < 3) throw NotApplicableError("lemma4_bound_check: requires d >= 3");
  const auto liou = build_liouvillian(probe, bath);
  const auto spec = numerical_spectrum(liou);
  const CMatrix tau = gibbs_state(probe, bath);
  ConvergenceBoundReport rep;
  rep.lambda_min = spec.lambda_min_nonzero;
  rep.g = log_derivative_constant(bath, probe.gap);
  rep.t_end = 10.0 / rep.lambda_min;
  const double eps = probe.epsilon_max;
  const double abs_tol = eps == 0.0 ? 1e-12 : 0.0;
  auto holds = [&](double lhs, double rhs) { return lhs <= rhs * (1.0 + 1e-9) + abs_tol; };

  TimeGrid grid = scan ? *scan : TimeGrid::log_default(rep.lambda_min);
  grid.validate();
  const CMatrix ground = basis_op(probe.d, 0, 0);
  const auto states = GridPropagator(liou.matrix, grid).evolve(ground);
  std::optional<std::size_t> last_bad;
  for (std::size_t k = 0; k < grid.times.size(); ++k) {
    const double t = grid.times[k];
    const double lhs = (states[k] - tau).squaredNorm();
    const double rhs = convergence_bound_rhs(probe.d, eps, rep.g, rep.lambda_min, t);
    rep.margin.push_back({t, lhs, rhs});
    if (t <= rep.t_end * (1.0 + 1e-12) && !holds(lhs, rhs)) last_bad = k;
  }
  if (!last_bad)
    rep.t_prime = grid.times.front();
  else if (*last_bad + 1 < grid.times.size() && grid.times[*last_bad + 1] <= rep.t_end * (1.0 + 1e-12))
    rep.t_prime = grid.times[*last_bad + 1];
  if (!rep.t_prime) return rep;

  const std::size_t n = 4 * grid.times.size();
  CVector v = expm_action(liou.matrix, vectorize(ground), *rep.t_prime);
  const double h = (rep.t_end - *rep.t_prime) / static_cast<double>(n - 1);
  if (!(h > 0.0)) return rep;
  const CMatrix step = expm(liou.matrix * h);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = *rep.t_prime + h * static_cast<double>(k);
    if (k > 0) v = step * v;
    const double lhs = (devectorize(v) - tau).squaredNorm();
    if (!holds(lhs, convergence_bound_rhs(probe.d, eps, rep.g, rep.lambda_min, t))) ++rep.violations;
    ++rep.refined_points;
  }
  return rep;
}

struct TheoremBoundInputs {
  double alpha = 0.2;
  double epsilon = 0.0;
  double g = 0.0;
  std::size_t d = 3;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("TheoremBoundInputs: alpha must lie in (0, 1]");
    if (!(epsilon >= 0.0) || !(g >= 0.0)) throw ValidationError("TheoremBoundInputs: epsilon and g must be >= 0");
    if (d < 2) throw ValidationError("TheoremBoundInputs: d must be >= 2");
  }

  // Haar mean of the excited-manifold weight statistic: (d-1)(d-2) / (d(d+1)).
  double mu_d() const {
    const double x = static_cast<double>(d);
    return (x - 1.0) * (x - 2.0) / (x * (x + 1.0));
  }

  double theta() const {
    const double x = static_cast<double>(d);
    return 1.1 * (epsilon * epsilon) / (alpha * alpha) * (x - 2.0) / (x - 1.0) * g * g;
  }
};

// delta <= 2 exp(-(d / 36 pi^3) [mu_d - theta]_+^2), clamped to [0, 1]; zero at d = 2.
inline double theorem1_delta(const TheoremBoundInputs& in) {
  in.validate();
  if (in.d == 2) return 0.0;
  const double bracket = std::max(0.0, in.mu_d() - in.theta());
  const double x = static_cast<double>(in.d);
  const double delta = 2.0 * std::exp(-x / (36.0 * M_PI * M_PI * M_PI) * bracket * bracket);
  return std::clamp(delta, 0.0, 1.0);
}

inline bool delta_bound_vacuous(double delta) { return delta >= 1.0; }

inline void write_trajectory_csv(std::ostream& os, const std::vector<Trajectory>& trajs) {
  os << "t,frobenius,trace,label\n";
  for (const auto& tr : trajs)
    for (std::size_t k = 0; k < tr.times.size(); ++k)
      os << csv::num(tr.times[k]) << ',' << csv::num(tr.frobenius[k]) << ',' << csv::num(tr.trace[k]) << ','
         << csv::field(tr.label) << '\n';
}

struct ExceedanceRow {
  std::uint64_t seed = 0;
  ExceedanceReport report;
};

inline void write_exceedance_csv(std::ostream& os, const std::vector<ExceedanceRow>& rows) {
  os << "seed,exceeds,t_prime,method\n";
  for (const auto& r : rows)
    os << r.seed << ',' << (r.report.inconclusive ? "inconclusive" : (r.report.exceeds ? "true" : "false")) << ','
       << (r.report.t_prime ? csv::num(*r.report.t_prime) : std::string()) << ',' << to_string(r.report.method) << '\n';
}

}  // namespace qmpe
