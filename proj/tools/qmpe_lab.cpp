// qmpe-lab: command-line driver for the qmpe library.
//
//   qmpe-lab <spectrum|evolve|optimal|mpemba|montecarlo|lemmas|figure3> --config <path> [--out <dir>] [--seed <u64>]
//
// Exit codes: 0 success, 1 a scientific check failed, 2 usage or configuration error.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qmpe/lemmas.hpp"
#include "qmpe/montecarlo.hpp"
#include "qmpe/mpemba.hpp"
#include "qmpe/spectral.hpp"
#include "qmpe/thermometry.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace qmpe;

namespace {

constexpr const char* kVersion = "1.0.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- config access

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void allow_keys(const json& obj, const std::string& path, const std::set<std::string>& keys) {
  if (!obj.is_object()) throw UsageError(path + ": expected an object");
  for (const auto& [k, v] : obj.items())
    if (!keys.count(k)) throw UsageError(join(path, k) + ": unknown key");
}

const json& section(const json& cfg, const std::string& name) {
  static const json empty = json::object();
  return cfg.contains(name) ? cfg.at(name) : empty;
}

double number(const json& obj, const std::string& path, const std::string& key, std::optional<double> fallback = {}) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw UsageError(join(path, key) + ": required key missing");
  }
  const auto& v = obj.at(key);
  if (!v.is_number()) throw UsageError(join(path, key) + ": expected a number");
  return v.get<double>();
}

double positive(const json& obj, const std::string& path, const std::string& key, std::optional<double> fallback = {}) {
  const double x = number(obj, path, key, fallback);
  if (!(x > 0.0) || !std::isfinite(x)) throw UsageError(join(path, key) + ": must be > 0");
  return x;
}

std::size_t count(const json& obj, const std::string& path, const std::string& key, std::optional<std::size_t> fallback,
                  std::size_t min_value = 1) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw UsageError(join(path, key) + ": required key missing");
  }
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min_value))
    throw UsageError(join(path, key) + ": expected an integer >= " + std::to_string(min_value));
  return v.get<std::size_t>();
}

struct Model {
  ProbeSpec probe;
  BathSpec bath;
};

Model parse_model(const json& cfg, bool figure_defaults) {
  if (!cfg.contains("model")) {
    if (!figure_defaults) throw UsageError("model: required key missing");
    Model m;
    m.probe = ProbeSpec::ramp(10, 1.0, 0.05);
    m.bath.density.omega_ref = m.probe.gap;
    return m;
  }
  const json& j = cfg.at("model");
  const std::string p = "model";
  allow_keys(j, p, {"d", "gap", "beta", "gamma", "epsilon", "detunings", "spectral_density"});
  const std::size_t d = count(j, p, "d", std::nullopt, 2);
  const double gap = positive(j, p, "gap");
  Model m;
  m.bath.beta = positive(j, p, "beta");
  m.bath.gamma = positive(j, p, "gamma");
  const double eps = number(j, p, "epsilon", 0.0);
  if (!(eps >= 0.0)) throw UsageError("model.epsilon: must be >= 0");
  try {
    if (j.contains("detunings")) {
      const auto& arr = j.at("detunings");
      if (!arr.is_array() || arr.size() != d - 1) throw UsageError("model.detunings: expected an array of d-1 numbers");
      std::vector<double> det;
      double largest = 0.0;
      for (const auto& x : arr) {
        if (!x.is_number()) throw UsageError("model.detunings: expected numbers");
        det.push_back(x.get<double>());
        largest = std::max(largest, std::abs(det.back()));
      }
      m.probe = ProbeSpec::with_detunings(gap, det, j.contains("epsilon") ? eps : largest);
    } else {
      m.probe = ProbeSpec::ramp(d, gap, eps);
    }
  } catch (const ValidationError& e) {
    throw UsageError(std::string("model: ") + e.what());
  }
  m.bath.density.omega_ref = gap;
  if (j.contains("spectral_density")) {
    const json& s = j.at("spectral_density");
    const std::string sp = "model.spectral_density";
    allow_keys(s, sp, {"kind", "params"});
    if (!s.contains("kind") || !s.at("kind").is_string()) throw UsageError(sp + ".kind: expected \"flat\" or \"ohmic\"");
    const auto kind = s.at("kind").get<std::string>();
    if (kind == "flat") {
      m.bath.density.kind = SpectralKind::flat;
      if (s.contains("params")) allow_keys(s.at("params"), sp + ".params", {});
    } else if (kind == "ohmic") {
      m.bath.density.kind = SpectralKind::ohmic;
      if (s.contains("params")) {
        allow_keys(s.at("params"), sp + ".params", {"omega_ref"});
        m.bath.density.omega_ref = positive(s.at("params"), sp + ".params", "omega_ref", gap);
      }
    } else {
      throw UsageError(sp + ".kind: expected \"flat\" or \"ohmic\"");
    }
  }
  return m;
}

// ---------------------------------------------------------------- run context

struct Run {
  std::string command;
  json config;
  fs::path out;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::string started_at;

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(out / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (out / name).string());
    f << content;
    outputs.push_back(name);
  }
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const Run& run, int exit_code) {
  json m;
  m["artifact_version"] = kVersion;
  m["command"] = run.command;
  m["seed"] = run.seed;
  m["started_at"] = run.started_at;
  m["finished_at"] = utc_now();
  m["exit_code"] = exit_code;
  m["outputs"] = run.outputs;
  m["config"] = run.config;
  const fs::path tmp = run.out / "manifest.json.tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    f << m.dump(2) << '\n';
  }
  fs::rename(tmp, run.out / "manifest.json");
}

json to_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

json model_echo(const Model& m) {
  json j;
  j["d"] = m.probe.d;
  j["gap"] = m.probe.gap;
  j["beta"] = m.bath.beta;
  j["gamma"] = m.bath.gamma;
  j["epsilon"] = m.probe.epsilon_max;
  j["detunings"] = m.probe.detunings;
  j["spectral_density"] = {{"kind", m.bath.density.kind == SpectralKind::flat ? "flat" : "ohmic"},
                           {"params", {{"omega_ref", m.bath.density.omega_ref}}}};
  return j;
}

// ---------------------------------------------------------------- commands

int cmd_spectrum(Run& run) {
  allow_keys(section(run.config, "spectrum"), "spectrum", {});
  const auto m = parse_model(run.config, false);
  const auto liou = build_liouvillian(m.probe, m.bath);
  const auto spec = numerical_spectrum(liou);

  std::ostringstream csvs;
  csvs << "index,re,im,subspace,residual\n";
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto& t = spec.triples[i];
    csvs << i << ',' << csv::num(t.lambda.real()) << ',' << csv::num(t.lambda.imag()) << ',' << to_string(t.subspace_tag)
         << ',' << csv::num(t.residual) << '\n';
  }
  run.write("spectrum.csv", csvs.str());

  json rep;
  rep["lambda_min"] = spec.lambda_min_nonzero;
  rep["lambda_max"] = spec.lambda_max;
  rep["biorthogonality_error"] = spec.biorthogonality_error();
  const auto coh = coherence_rate_comparison(m.probe, m.bath);
  rep["ground_excited_coherence_rate"] = {{"generator", coh.numerical},
                                          {"closed_form_main", coh.formula_main},
                                          {"closed_form_appendix", coh.formula_appendix},
                                          {"deviation_main", coh.deviation_main},
                                          {"deviation_appendix", coh.deviation_appendix}};
  int code = 0;
  if (m.probe.degenerate()) {
    const auto ana = analytic_spectrum_degenerate(m.probe, m.bath);
    auto key = [](const EigenTriple& t) { return std::make_pair(t.lambda.real(), t.lambda.imag()); };
    std::vector<std::pair<double, double>> a, b;
    for (const auto& t : ana.triples) a.push_back(key(t));
    for (const auto& t : spec.triples) b.push_back(key(t));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double dev = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      dev = std::max(dev, std::hypot(a[i].first - b[i].first, a[i].second - b[i].second));
    rep["max_eigenvalue_deviation"] = dev;
    std::cout << "max eigenvalue deviation (analytic vs numerical): " << csv::num(dev) << '\n';
    if (dev > 1e-8) code = 1;
  } else {
    rep["max_eigenvalue_deviation"] = nullptr;
    std::cout << "detuned probe: no closed-form spectrum to compare against\n";
  }
  std::cout << "lambda_min " << csv::num(spec.lambda_min_nonzero) << "  lambda_max " << csv::num(spec.lambda_max) << '\n';
  run.write("spectrum_report.json", rep.dump(2) + "\n");
  return code;
}

std::vector<ProbeState> named_states(const json& list, const std::string& path, std::size_t d, const CMatrix& tau,
                                     std::size_t n_random, double alpha, std::uint64_t seed) {
  std::vector<ProbeState> out;
  if (!list.is_array()) throw UsageError(path + ": expected an array of state names");
  for (const auto& v : list) {
    const auto name = v.is_string() ? v.get<std::string>() : std::string();
    if (name == "ground")
      out.push_back(ProbeState::ground(d));
    else if (name == "excited_uniform")
      out.push_back(ProbeState::excited_uniform(d));
    else if (name == "haar")
      for (std::size_t i = 0; i < n_random; ++i) out.push_back(ProbeState::haar(d, seed, i));
    else if (name == "mixed")
      for (std::size_t i = 0; i < n_random; ++i) out.push_back(ProbeState::mixed(alpha, tau, seed, i));
    else
      throw UsageError(path + ": unknown state \"" + name + "\" (ground, excited_uniform, haar, mixed)");
  }
  return out;
}

double fraction(const json& obj, const std::string& path, const std::string& key, double fallback) {
  const double a = number(obj, path, key, fallback);
  if (!(a > 0.0 && a <= 1.0)) throw UsageError(join(path, key) + ": must lie in (0, 1]");
  return a;
}

int cmd_evolve(Run& run) {
  const json& s = section(run.config, "evolve");
  allow_keys(s, "evolve", {"t_max", "n_points", "states", "n_random", "alpha"});
  const auto m = parse_model(run.config, false);
  const auto liou = build_liouvillian(m.probe, m.bath);
  const auto spec = numerical_spectrum(liou);
  const CMatrix tau = gibbs_state(m.probe, m.bath);
  const double t_max = positive(s, "evolve", "t_max", 10.0 / spec.lambda_min_nonzero);
  const std::size_t n_points = count(s, "evolve", "n_points", 201, 2);
  const auto states = named_states(s.contains("states") ? s.at("states") : json::array({"ground", "mixed"}), "evolve.states",
                                   m.probe.d, tau, count(s, "evolve", "n_random", 3, 0), fraction(s, "evolve", "alpha", 0.2),
                                   run.seed);
  std::vector<Trajectory> trajs;
  double worst = 0.0;
  for (const auto& st : states) {
    trajs.push_back(evolve_trajectory(liou, st, t_max, n_points, tau));
    worst = std::max(worst, mode_expansion_deviation(trajs.back(), spec, st, tau));
  }
  std::ostringstream os;
  write_trajectory_csv(os, trajs);
  run.write("trajectories.csv", os.str());
  std::cout << trajs.size() << " trajectories; largest deviation from the mode expansion " << csv::num(worst) << '\n';
  return worst > 1e-8 ? 1 : 0;
}

int cmd_optimal(Run& run) {
  const json& s = section(run.config, "optimal");
  allow_keys(s, "optimal", {"n_samples", "parallel_width"});
  const auto m = parse_model(run.config, false);
  const auto liou = build_liouvillian(m.probe, m.bath);
  const std::size_t n = count(s, "optimal", "n_samples", 1000);
  const auto rep = verify_ground_optimality(liou, m.probe, m.bath, n, run.seed, count(s, "optimal", "parallel_width", 1));

  std::vector<ThermometryRow> rows;
  rows.push_back({"ground", std::nullopt, rep.ground_value, rep.roof});
  const std::size_t structured = rep.values.size() - n;
  for (std::size_t i = 0; i < rep.values.size(); ++i) {
    std::optional<std::uint64_t> seed;
    if (i >= structured) seed = run.seed;
    rows.push_back({rep.values[i].first, seed, rep.values[i].second, rep.roof});
  }
  std::ostringstream os;
  write_thermometry_csv(os, rows);
  run.write("thermometry.csv", os.str());

  json j;
  j["roof"] = rep.roof;
  j["ground_value"] = rep.ground_value;
  j["max_sampled"] = rep.max_sampled;
  j["argmax_label"] = rep.argmax_label;
  j["evaluated"] = rep.evaluated;
  j["ok"] = rep.ok;
  j["optimal_frequency"] = optimal_frequency(m.bath);
  if (rep.counterexample) j["counterexample"] = rep.counterexample->label;
  run.write("optimality.json", j.dump(2) + "\n");
  std::cout << "roof " << csv::num(rep.roof) << "  ground " << csv::num(rep.ground_value) << "  max sampled "
            << csv::num(rep.max_sampled) << " (" << rep.argmax_label << ")\n";
  return rep.ok ? 0 : 1;
}

int cmd_mpemba(Run& run) {
  const json& s = section(run.config, "mpemba");
  allow_keys(s, "mpemba", {"alpha", "n_references", "tail_band_width"});
  const auto m = parse_model(run.config, false);
  const double alpha = fraction(s, "mpemba", "alpha", 0.2);
  const std::size_t n_ref = count(s, "mpemba", "n_references", 10);
  const double band = positive(s, "mpemba", "tail_band_width", 0.1);
  const auto liou = build_liouvillian(m.probe, m.bath);
  const auto spec = numerical_spectrum(liou);
  const CMatrix tau = gibbs_state(m.probe, m.bath);
  const GridPropagator prop(liou.matrix, TimeGrid::log_default(spec.lambda_min_nonzero));
  const std::size_t d = m.probe.d;

  std::vector<Trajectory> trajs;
  trajs.push_back(evolve_on_grid(prop, tau, ProbeState::ground(d)));
  trajs.back().tail_amplitude = tail_band_amplitude(spec, basis_op(d, 0, 0), band);
  std::vector<ExceedanceRow> rows;
  std::size_t exceed = 0;
  for (std::size_t i = 0; i < n_ref; ++i) {
    const auto ref = ProbeState::mixed(alpha, tau, run.seed, i);
    trajs.push_back(evolve_on_grid(prop, tau, ref));
    trajs.back().tail_amplitude = tail_band_amplitude(spec, ref.matrix, band);
    rows.push_back({i, detect_exceeding(trajs.front(), trajs.back())});
    exceed += rows.back().report.exceeds;
  }
  std::ostringstream a, b;
  write_trajectory_csv(a, trajs);
  write_exceedance_csv(b, rows);
  run.write("trajectories.csv", a.str());
  run.write("exceedance.csv", b.str());

  json j;
  j["references"] = n_ref;
  j["exceeded"] = exceed;
  j["lambda_min"] = spec.lambda_min_nonzero;
  int code = 0;
  if (d >= 3) {
    const auto lb = lemma4_bound_check(m.probe, m.bath);
    std::ostringstream c;
    c << "t,lhs,rhs\n";
    for (const auto& r : lb.margin) c << csv::num(r[0]) << ',' << csv::num(r[1]) << ',' << csv::num(r[2]) << '\n';
    run.write("convergence_bound.csv", c.str());
    j["convergence_bound"] = {{"t_prime", to_json(lb.t_prime)}, {"violations", lb.violations},
                              {"refined_points", lb.refined_points}, {"t_end", lb.t_end}, {"g", lb.g}};
    if (!lb.t_prime || lb.violations > 0) code = 1;
    TheoremBoundInputs in{alpha, m.probe.epsilon_max, lb.g, d};
    j["delta_bound"] = theorem1_delta(in);
    j["mu_d"] = in.mu_d();
    j["theta"] = in.theta();
    std::cout << "convergence bound: t' " << (lb.t_prime ? csv::num(*lb.t_prime) : std::string("none")) << ", "
              << lb.violations << " violations\n";
  }
  run.write("mpemba.json", j.dump(2) + "\n");
  std::cout << "ground state exceeds " << exceed << " of " << n_ref << " references\n";
  return code;
}

int cmd_montecarlo(Run& run) {
  const json& s = section(run.config, "montecarlo");
  allow_keys(s, "montecarlo", {"n_samples", "alpha", "parallel_width", "tail_band_width", "t_max"});
  const auto m = parse_model(run.config, false);
  MCConfig mc;
  mc.n_samples = count(s, "montecarlo", "n_samples", 100);
  mc.alpha = fraction(s, "montecarlo", "alpha", 0.2);
  mc.parallel_width = count(s, "montecarlo", "parallel_width", 1);
  mc.tail_band_width = positive(s, "montecarlo", "tail_band_width", 0.1);
  mc.seed = run.seed;
  std::optional<double> t_max;
  if (s.contains("t_max")) t_max = positive(s, "montecarlo", "t_max");
  const auto rep = run_exceedance_experiment(m.probe, m.bath, mc, t_max);

  std::vector<ExceedanceRow> rows;
  for (const auto& smp : rep.samples) rows.push_back({smp.index, smp.report});
  std::ostringstream os;
  write_exceedance_csv(os, rows);
  run.write("exceedance.csv", os.str());

  json j;
  j["artifact_version"] = kVersion;
  j["config"] = {{"model", model_echo(m)},
                 {"montecarlo",
                  {{"n_samples", mc.n_samples},
                   {"alpha", mc.alpha},
                   {"tail_band_width", mc.tail_band_width},
                   {"t_max", to_json(t_max)}}},
                 {"seed", run.seed}};
  j["exceed_count"] = rep.exceed_count;
  j["n"] = rep.n;
  j["n_samples"] = rep.n_samples;
  j["inconclusive"] = rep.inconclusive;
  j["frequency"] = rep.frequency;
  j["wilson_ci95"] = {rep.wilson_ci95.first, rep.wilson_ci95.second};
  j["mean_f"] = rep.mean_f;
  j["se_f"] = rep.se_f;
  j["mu_d"] = rep.mu_d;
  j["delta_bound"] = rep.delta_bound;
  j["delta_bound_vacuous"] = delta_bound_vacuous(rep.delta_bound);
  j["theta"] = rep.theta;
  j["g"] = rep.g;
  j["lambda_min"] = rep.lambda_min;
  run.write("mc_report.json", j.dump(2) + "\n");

  const double se = rep.n ? std::sqrt(rep.frequency * (1.0 - rep.frequency) / static_cast<double>(rep.n)) : 0.0;
  const double floor = 1.0 - std::min(1.0, rep.delta_bound) - 3.0 * se;
  std::cout << "frequency " << rep.frequency << " (" << rep.exceed_count << "/" << rep.n << ", " << rep.inconclusive
            << " inconclusive)  CI95 [" << rep.wilson_ci95.first << ", " << rep.wilson_ci95.second << "]  delta_bound "
            << rep.delta_bound << (delta_bound_vacuous(rep.delta_bound) ? " (vacuous)" : "") << '\n';
  return rep.frequency >= floor ? 0 : 1;
}

int cmd_lemmas(Run& run) {
  const json& s = section(run.config, "lemmas");
  allow_keys(s, "lemmas", {"n_instances", "d_min", "d_max", "gallery_attempts", "thermometry_samples"});
  const std::size_t n = count(s, "lemmas", "n_instances", 10000);
  const std::size_t d_min = count(s, "lemmas", "d_min", 2, 2);
  const std::size_t d_max = count(s, "lemmas", "d_max", 8, 2);
  if (d_max < d_min) throw UsageError("lemmas.d_max: must be >= lemmas.d_min");
  const std::size_t gallery_attempts = count(s, "lemmas", "gallery_attempts", 2000, 0);
  const std::size_t thermo = count(s, "lemmas", "thermometry_samples", 100, 0);
  std::optional<Model> model;
  if (run.config.contains("model")) model = parse_model(run.config, false);

  json j;
  json counter = json::array();
  std::size_t violations = 0;
  for (std::size_t d = d_min; d <= d_max; ++d) {
    const auto l1 = lemma1_sweep(n, d, substream_seed(run.seed, 2 * d), BlockRegime::hermitian);
    const auto l2 = lemma2_sweep(n, d, substream_seed(run.seed, 2 * d + 1), BlockRegime::hermitian, true);
    violations += l1.violations + l2.violations;
    std::ostringstream os;
    write_lemma_csv(os, l2.records);
    run.write("lemma2_d" + std::to_string(d) + ".csv", os.str());
    const auto gallery = violation_gallery(gallery_attempts, d, substream_seed(run.seed, 1000 + d));
    j["per_dimension"].push_back({{"d", d},
                                  {"lemma1", {{"evaluated", l1.evaluated}, {"violations", l1.violations}}},
                                  {"lemma2",
                                   {{"evaluated", l2.evaluated},
                                    {"violations", l2.violations},
                                    {"rejection_cap_hits", l2.exhausted}}},
                                  {"gallery_size", gallery.size()}});
    for (const auto& ce : l2.counterexamples) {
      json c;
      c["d"] = d;
      c["alpha"] = ce.alpha;
      c["a"] = {ce.a.real(), ce.a.imag()};
      c["b"] = {ce.b.real(), ce.b.imag()};
      counter.push_back(c);
    }
    std::cout << "d=" << d << "  lemma1 " << l1.evaluated - l1.violations << "/" << l1.evaluated << "  lemma2 "
              << l2.evaluated - l2.violations << "/" << l2.evaluated << "  gallery " << gallery.size() << '\n';
  }

  std::size_t thermo_fail = 0, thermo_total = 0;
  const BathSpec bath = model ? model->bath : BathSpec{};
  const double gap = model ? model->probe.gap : 1.0;
  const double eps = model ? model->probe.epsilon_max : 0.05;
  for (std::size_t d = 3; d <= 10 && thermo > 0; ++d)
    for (std::size_t i = 0; i < thermo; ++i) {
      const auto probe = ProbeSpec::ramp(d, gap, eps);
      ++thermo_total;
      if (!thermometry_conditions_check(probe, bath, haar_pure_state(d - 1, substream_seed(run.seed, 5000 + d), i)).all())
        ++thermo_fail;
    }
  j["thermometry_conditions"] = {{"evaluated", thermo_total}, {"failures", thermo_fail}};
  std::cout << "thermometry block conditions: " << thermo_total - thermo_fail << "/" << thermo_total << '\n';
  violations += thermo_fail;
  if (!counter.empty()) run.write("counterexamples.json", counter.dump(2) + "\n");
  run.write("lemmas.json", j.dump(2) + "\n");
  return violations == 0 ? 0 : 1;
}

std::string gnuplot_script() {
  return "# gnuplot -p figure3.gp\n"
         "set datafile separator ','\n"
         "set multiplot layout 1,2\n"
         "set title 'trace distance to the Gibbs state'\n"
         "set xlabel 't'\n"
         "set logscale y\n"
         "set key off\n"
         "plot 'panel_a.csv' using 1:(strcol(4) eq \"ground\" ? $3 : 1/0) with lines lw 3 lc rgb 'blue', \\\n"
         "     'panel_a.csv' using 1:(strcol(4) ne \"ground\" ? $3 : 1/0) with points pt 7 ps 0.3 lc rgb 'orange'\n"
         "unset logscale y\n"
         "set title 'finite-time sensitivity versus fitted rate'\n"
         "set xlabel 'convergence rate'\n"
         "set ylabel 'trace norm of d rho / d beta'\n"
         "plot 'panel_b.csv' using 3:(strcol(1) eq \"haar\" ? $4 : 1/0) with points pt 7 lc rgb 'orange', \\\n"
         "     'panel_b.csv' using 3:(strcol(1) eq \"ground\" ? $4 : 1/0) with points pt 5 ps 2 lc rgb 'blue'\n"
         "unset multiplot\n";
}

int cmd_figure3(Run& run) {
  const json& s = section(run.config, "figure3");
  allow_keys(s, "figure3", {"alpha", "n_random", "n_scatter", "dt", "dbeta", "fit_window", "fit_points", "parallel_width",
                            "tail_band_width"});
  const auto m = parse_model(run.config, true);
  const double alpha = fraction(s, "figure3", "alpha", 0.2);
  const std::size_t n_random = count(s, "figure3", "n_random", 20);
  const std::size_t n_scatter = count(s, "figure3", "n_scatter", 200, 2);
  const double dt = positive(s, "figure3", "dt", 0.1);
  const double dbeta = positive(s, "figure3", "dbeta", 1e-4 * m.bath.beta);
  const double window = positive(s, "figure3", "fit_window", 1.0 / m.bath.gamma);
  const std::size_t fit_points = count(s, "figure3", "fit_points", 101, 2);
  const std::size_t width = count(s, "figure3", "parallel_width", 1);
  const double band = positive(s, "figure3", "tail_band_width", 0.1);
  const std::size_t d = m.probe.d;

  const auto liou = build_liouvillian(m.probe, m.bath);
  const auto spec = numerical_spectrum(liou);
  const CMatrix tau = gibbs_state(m.probe, m.bath);

  // panel (a): ground state against mixed references
  const GridPropagator prop(liou.matrix, TimeGrid::log_default(spec.lambda_min_nonzero));
  std::vector<Trajectory> trajs(1 + n_random);
  trajs[0] = evolve_on_grid(prop, tau, ProbeState::ground(d));
  trajs[0].tail_amplitude = tail_band_amplitude(spec, basis_op(d, 0, 0), band);
  const auto refs = parallel_map(n_random, width, [&](std::size_t i) {
    const auto ref = ProbeState::mixed(alpha, tau, run.seed, i);
    auto tr = evolve_on_grid(prop, tau, ref);
    tr.tail_amplitude = tail_band_amplitude(spec, ref.matrix, band);
    return tr;
  });
  std::vector<ExceedanceRow> crossings;
  std::size_t exceeded = 0;
  for (std::size_t i = 0; i < n_random; ++i) {
    trajs[1 + i] = refs[i];
    crossings.push_back({i, detect_exceeding(trajs[0], refs[i])});
    exceeded += crossings.back().report.exceeds;
  }
  std::ostringstream a, c;
  write_trajectory_csv(a, trajs);
  write_exceedance_csv(c, crossings);
  run.write("panel_a.csv", a.str());
  run.write("panel_a_crossings.csv", c.str());

  // panel (b): fitted rate against finite-time sensitivity
  SensitivityScanConfig sc;
  sc.n_states = n_scatter;
  sc.dt = dt;
  sc.dbeta = dbeta;
  sc.fit_window = window;
  sc.fit_points = fit_points;
  sc.seed = run.seed;
  sc.parallel_width = width;
  const auto scan = sensitivity_scan(m.probe, m.bath, sc);
  std::ostringstream b;
  b << "label,index,rate,distinguishability,optimal\n";
  b << "ground,," << csv::num(scan.ground.rate) << ',' << csv::num(scan.ground.value) << ",true\n";
  for (std::size_t i = 0; i < scan.haar.size(); ++i)
    b << "haar," << i << ',' << csv::num(scan.haar[i].rate) << ',' << csv::num(scan.haar[i].value) << ",false\n";
  run.write("panel_b.csv", b.str());
  run.write("figure3.gp", gnuplot_script());

  const double rho = scan.spearman;
  const bool ground_max = scan.ground_is_strict_max;
  json j;
  j["panel_a"] = {{"references", n_random}, {"exceeded_by_ground", exceeded}};
  j["panel_b"] = {{"samples", n_scatter},
                  {"ground_rate", scan.ground.rate},
                  {"ground_distinguishability", scan.ground.value},
                  {"ground_is_strict_maximum", ground_max},
                  {"spearman_rate_vs_distinguishability", rho},
                  {"roundoff_warnings", scan.roundoff_warnings}};
  run.write("figure3.json", j.dump(2) + "\n");
  std::cout << "panel a: ground state exceeds " << exceeded << "/" << n_random << " references\n"
            << "panel b: ground sensitivity " << csv::num(scan.ground.value) << (ground_max ? " (strict maximum)" : " (NOT maximal)")
            << ", Spearman " << rho << '\n';
  return ground_max && rho > 0.0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qmpe-lab: thermalization and thermometry experiments on a star-shaped probe"};
  app.set_version_flag("--version", kVersion);
  std::string command, config_path, out_dir;
  std::optional<std::uint64_t> seed_flag;
  app.add_option("command", command, "spectrum | evolve | optimal | mpemba | montecarlo | lemmas | figure3")
      ->required()
      ->check(CLI::IsMember({"spectrum", "evolve", "optimal", "mpemba", "montecarlo", "lemmas", "figure3"}));
  app.add_option("--config", config_path, "JSON experiment configuration (schema_version 1)")->required();
  app.add_option("--out", out_dir, "output directory (overrides output_dir in the config)");
  app.add_option("--seed", seed_flag, "RNG seed (overrides seed in the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  Run run;
  run.command = command;
  run.started_at = utc_now();
  try {
    std::ifstream f(config_path);
    if (!f) throw UsageError("cannot open config file " + config_path);
    try {
      run.config = json::parse(f);
    } catch (const json::parse_error& e) {
      throw UsageError(std::string("config is not valid JSON: ") + e.what());
    }
    allow_keys(run.config, "", {"schema_version", "model", "seed", "output_dir", "spectrum", "evolve", "optimal", "mpemba",
                                "montecarlo", "lemmas", "figure3"});
    if (!run.config.contains("schema_version") || run.config.at("schema_version") != 1)
      throw UsageError("schema_version: must be 1");
    if (run.config.contains("seed") && !run.config.at("seed").is_number_unsigned())
      throw UsageError("seed: expected a non-negative integer");
    run.seed = seed_flag ? *seed_flag : run.config.value("seed", std::uint64_t{0});
    if (run.config.contains("output_dir") && !run.config.at("output_dir").is_string())
      throw UsageError("output_dir: expected a string");
    run.out = !out_dir.empty() ? fs::path(out_dir) : fs::path(run.config.value("output_dir", std::string("qmpe-out")));
    fs::create_directories(run.out);
    fs::remove(run.out / "manifest.json");

    int code = 0;
    if (command == "spectrum") code = cmd_spectrum(run);
    if (command == "evolve") code = cmd_evolve(run);
    if (command == "optimal") code = cmd_optimal(run);
    if (command == "mpemba") code = cmd_mpemba(run);
    if (command == "montecarlo") code = cmd_montecarlo(run);
    if (command == "lemmas") code = cmd_lemmas(run);
    if (command == "figure3") code = cmd_figure3(run);
    write_manifest(run, code);
    if (code != 0) std::cerr << "qmpe-lab: a scientific check failed (exit 1)\n";
    return code;
  } catch (const UsageError& e) {
    std::cerr << "qmpe-lab: usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "qmpe-lab: " << e.what() << '\n';
    return 1;
  }
}
