#include "semicorr/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "semicorr/checksum.hpp"
#include "semicorr/error.hpp"
#include "semicorr/grid_io.hpp"
#include "semicorr/medium.hpp"
#include "semicorr/noise.hpp"
#include "semicorr/rng.hpp"
#include "semicorr/scattering.hpp"
#include "semicorr/semiclassical.hpp"
#include "semicorr/surface_waves.hpp"
#include "semicorr/wave_sim.hpp"

#ifndef SEMICORR_VERSION
#define SEMICORR_VERSION "unknown"
#endif

namespace semicorr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kCflWarning = 0.4;

struct ScenarioDef {
  const char* name;
  const char* description;
  bool wave;  // needs grid, medium, noise, receivers
  std::vector<std::string> metrics;
};

const std::vector<ScenarioDef>& scenarios() {
  static const std::vector<ScenarioDef> defs = {
      {"white-noise-identity",
       "flat noise, constant damping: dC/dtau against -level G / (2 a0), plus the C_AB(-tau) = C_BA(tau) reflection",
       true,
       {"identity_rel_l2", "identity_amplitude_ratio", "identity_peak_shift", "reflection_rel_l2", "max_abs_record"}},
      {"localized-source-asymmetry",
       "localized source patch: measured C(-tau)/C(tau) amplitude ratio against the ray prediction k",
       true,
       {"k_predicted", "k_empirical", "k_exact", "k_rel_error", "k_exact_rel_error", "max_abs_record"}},
      {"predictor-vs-empirical",
       "ray-based correlation predictor against the simulated ensemble, optionally over several epsilon",
       true,
       {"rel_l2", "exact_rel_l2", "refinement_ratio", "amplitude_ratio", "peak_shift", "max_abs_record"}},
      {"dispersion-inversion",
       "two-layer depth profile: dispersion curve, then Levenberg-Marquardt recovery from clean and noisy data",
       false,
       {"speed_error_clean", "interface_error_clean", "residual_clean", "speed_error_noisy", "interface_error_noisy",
        "residual_noisy", "noise_floor"}},
      {"scattering-identity",
       "Helmholtz scattering: angular-average correlation against -8 pi n0 Im G, free space and penetrable disk",
       false,
       {"free_space_max_rel_error", "disk_max_rel_error", "far_field_rel_error"}},
  };
  return defs;
}

const ScenarioDef& scenario_def(const std::string& name) {
  for (const auto& d : scenarios())
    if (name == d.name) return d;
  throw InvalidArgument("config: unknown scenario '" + name + "'");
}

Eigen::Vector2d vec2(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || j.size() > 2)
    throw InvalidArgument("config: " + what + " must be an array of 1 or 2 numbers");
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidArgument("config: " + what + " must hold numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json vec_json(const Eigen::Vector2d& v, int dim) {
  return dim == 1 ? json::array({v[0]}) : json::array({v[0], v[1]});
}

double number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw InvalidArgument(std::string("config: '") + key + "' must be a number");
  return j.at(key).get<double>();
}

void require_positive(double v, const std::string& what) {
  if (!(v > 0) || !std::isfinite(v)) throw InvalidArgument("config: " + what + " must be positive");
}

// NaN and inf become null so the manifest stays valid JSON.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double rel_err(double x, double ref) { return std::abs(x / ref - 1); }

// Output directory with the list of emitted files.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  std::string path(const std::string& rel) {
    const fs::path p = dir_ / rel;
    fs::create_directories(p.parent_path());
    return p.string();
  }
  void write_json(const std::string& rel, const json& j) {
    std::ofstream os(path(rel));
    if (!os) throw InvalidArgument("cannot write '" + rel + "'");
    os << j.dump(2) << '\n';
  }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
};

struct Result {
  json metrics = json::object();
  json diagnostics = json::object();
  std::vector<std::string> warnings;
  void warn(const std::vector<std::string>& w, const std::string& prefix) {
    for (const auto& s : w) warnings.push_back(prefix + s);
  }
};

// ---- shared wave-scenario setup ----------------------------------------------

PhaseSpaceContext make_context(const ExperimentConfig& c, double eps) { return {c.dim, c.n, c.length, eps}; }

Medium make_medium(const ExperimentConfig& c) {
  json j = c.medium;
  if (!j.contains("dim")) j["dim"] = c.dim;
  if (!j.contains("period")) j["period"] = c.length;
  if (j.at("dim").get<int>() != c.dim) throw InvalidArgument("config: medium dim differs from the grid");
  return Medium::from_json(j);
}

NoiseModel make_noise(const ExperimentConfig& c, const PhaseSpaceContext& ctx, std::uint64_t seed, double dt) {
  return {ctx, PowerSpectrum::from_json(c.noise, ctx), seed, dt, number(c.noise, "rank_tolerance", 1e-13)};
}

struct WaveSetup {
  Medium medium;
  double dt;
  Eigen::Vector2d a, b;
  SimulationOptions sim;
};

WaveSetup wave_setup(const ExperimentConfig& c, const RunOptions& opt, Result& res) {
  const Medium m = make_medium(c);
  const Grid g{c.dim, c.n, c.length};
  const double dt = cfl_time_step(m, g, c.cfl);
  // Receivers sit on nodes so the impulse responses use the same points.
  auto snap = [&](const Eigen::Vector2d& x, const char* which) {
    const Eigen::Vector2d p = g.position(g.nearest_node(x));
    if (g.wrap_delta(p, x).head(c.dim).norm() > 1e-9 * g.h())
      res.warnings.push_back(std::string("receiver ") + which + " moved to the nearest grid node");
    return p;
  };
  WaveSetup w{m, dt, snap(c.receivers[0], "A"), snap(c.receivers[1], "B"), {}};
  w.sim.dt = dt;
  w.sim.tau_max = c.tau_max;
  w.sim.window = c.window;
  w.sim.burn_in = c.burn_in;
  w.sim.ensemble = c.ensemble;
  w.sim.batch = c.batch;
  w.sim.threads = opt.threads;
  const SimulationPlan plan = plan_simulation(m, g, w.sim);
  w.sim.window = plan.window;
  w.sim.burn_in = plan.burn_in;
  res.diagnostics["dt"] = dt;
  res.diagnostics["cfl"] = c.cfl;
  res.diagnostics["cfl_limit_ratio"] = kDefaultCfl / c.cfl;
  res.diagnostics["steps"] = plan.steps;
  res.diagnostics["window"] = plan.window;
  res.diagnostics["burn_in"] = plan.burn_in;
  res.diagnostics["receiver_a"] = vec_json(w.a, c.dim);
  res.diagnostics["receiver_b"] = vec_json(w.b, c.dim);
  if (c.cfl > kCflWarning)
    res.warnings.push_back("CFL number " + format_double(c.cfl) + " is within " + format_double(kDefaultCfl - c.cfl) +
                           " of the solver limit " + format_double(kDefaultCfl));
  if (plan.burn_in < 5 * attenuation_time(m))
    res.warnings.push_back("burn-in shorter than 5 attenuation times; start-up transient may remain");
  return w;
}

double max_abs(const CorrelationRecord& r) { return r.values.size() ? r.values.cwiseAbs().maxCoeff() : 0.0; }

// ---- scenarios ----------------------------------------------------------------

Result white_noise_identity(const ExperimentConfig& c, std::uint64_t seed, const RunOptions& opt, Outputs& out) {
  Result res;
  const std::string preset = c.noise.at("preset").get<std::string>();
  if (preset != "flat" && preset != "white" && preset != "zero")
    throw InvalidArgument("white-noise-identity: noise preset must be flat, white or zero");
  const double level = preset == "zero" ? 0.0 : number(c.noise, "level", 1.0);
  const PhaseSpaceContext ctx = make_context(c, c.epsilon);
  WaveSetup w = wave_setup(c, opt, res);
  if (!w.medium.constant_attenuation() || !(w.medium.inf_a() > 0))
    throw InvalidArgument("white-noise-identity: attenuation must be a positive constant");
  const double a0 = w.medium.inf_a();
  const NoiseModel nm = make_noise(c, ctx, seed, w.dt);
  res.diagnostics["noise_rank"] = nm.rank();

  std::vector<TraceSet> traces;
  const CorrelationRecord cab = simulate_correlation(w.medium, nm, w.a, w.b, w.sim, &traces);
  CorrelationRecord cba = empirical_correlation(traces[1], traces[0], c.tau_max, w.sim.burn_in, w.sim.window);
  cba.a = w.b;
  cba.b = w.a;
  const CorrelationRecord d = correlation_derivative(cab);
  const GreensFunction gf = greens(w.medium, ctx.grid, w.b, {w.a}, c.tau_max, cab.dtau);
  res.warn(cab.warnings, "C_AB: ");
  res.warn(gf.warnings, "Green's function: ");
  const long J = cab.half_width();
  if (gf.samples.rows() < J + 1) throw NumericalError("white-noise-identity: Green's function shorter than the lag grid");
  // dC/dtau is odd for white noise: +level G(|tau|) / (2 a0) on the negative side.
  CorrelationRecord ref = d;
  ref.provenance = Provenance::Exact;
  for (long l = -J; l <= J; ++l) {
    const double gval = gf.samples(std::abs(l), 0) * level / (2 * a0);
    ref.values(l + J) = l >= 0 ? -gval : gval;
  }

  const double near = number(c.params, "near_field", 0.2);
  const LagWindow win{near * c.tau_max, c.tau_max, 0};
  const CompareMetrics m = compare(d, ref, win);
  const CompareMetrics refl_cmp = compare(cab.reflected(), cba, {0, c.tau_max, 0});
  res.metrics["identity_rel_l2"] = num(m.relative_l2);
  res.metrics["identity_amplitude_ratio"] = num(m.amplitude_ratio);
  res.metrics["identity_peak_shift"] = m.peak_shift_samples;
  res.metrics["reflection_rel_l2"] = num(refl_cmp.relative_l2);
  res.metrics["max_abs_record"] = max_abs(cab);
  res.diagnostics["identity_window"] = {win.lo, win.hi};
  res.diagnostics["a0"] = a0;
  res.diagnostics["noise_level"] = level;

  write_csv(out.path("records/c_ab.csv"), cab);
  write_csv(out.path("records/c_ba.csv"), cba);
  write_csv(out.path("records/dc_dtau.csv"), d);
  out.write_json("records/c_ab.json", record_metadata(cab));
  write_overlay_csv(out.path("overlays/identity.csv"), {"dC_dtau", "minus_G_over_2a0"}, {&d, &ref});
  const CorrelationRecord refl = cab.reflected();
  write_overlay_csv(out.path("overlays/reflection.csv"), {"C_AB_minus_tau", "C_BA_tau"}, {&refl, &cba});
  save_symbol(out.path("fields/power_spectrum.scgrid"), nm.symbol());
  return res;
}

Result localized_source_asymmetry(const ExperimentConfig& c, std::uint64_t seed, const RunOptions& opt,
                                  Outputs& out) {
  Result res;
  const PhaseSpaceContext ctx = make_context(c, c.epsilon);
  WaveSetup w = wave_setup(c, opt, res);
  const NoiseModel nm = make_noise(c, ctx, seed, w.dt);
  res.diagnostics["noise_rank"] = nm.rank();
  double tau = number(c.params, "travel_time", 0.0);
  if (tau <= 0) {
    if (!w.medium.homogeneous_speed())
      throw InvalidArgument("localized-source-asymmetry: params.travel_time is required for a variable speed");
    tau = ctx.grid.wrap_delta(w.a, w.b).head(c.dim).norm() / std::sqrt(w.medium.inf_n());
  }
  if (tau >= c.tau_max) throw InvalidArgument("localized-source-asymmetry: travel time must be below tau_max");
  double lo = 0.6 * tau, hi = std::min(1.4 * tau, c.tau_max);
  if (c.params.contains("fit_window")) {
    const Eigen::Vector2d fw = vec2(c.params.at("fit_window"), "params.fit_window");
    lo = fw[0];
    hi = fw[1];
  }
  if (!(0 < lo && lo < hi && hi <= c.tau_max))
    throw InvalidArgument("localized-source-asymmetry: fit window must satisfy 0 < lo < hi <= tau_max");

  const CorrelationRecord cab = simulate_correlation(w.medium, nm, w.a, w.b, w.sim);
  res.warn(cab.warnings, "C_AB: ");
  const AsymmetryFactor k = asymmetry_factor(w.a, w.b, tau, w.medium, nm);
  res.warn(k.notes, "k: ");
  if (k.one_sided) res.warnings.push_back("k undefined: no source exposure behind B");
  const double zero_scale = max_abs(cab);
  const double k_emp = zero_scale > 0 ? empirical_asymmetry(cab, lo, hi) : kNaN;

  double k_ex = kNaN;
  CorrelationRecord ex;
  const bool with_exact = c.params.value("include_exact", true);
  if (with_exact) {
    ExactOptions eo;
    eo.dt = w.dt;
    ex = exact_correlation(w.medium, nm, w.a, w.b, c.tau_max, eo);
    res.warn(ex.warnings, "exact: ");
    if (max_abs(ex) > 0) k_ex = empirical_asymmetry(ex, lo, hi);
    res.diagnostics["exact_tail_ratio"] = ex.tail_ratio;
  }
  res.metrics["k_predicted"] = num(k.k);
  res.metrics["k_empirical"] = num(k_emp);
  res.metrics["k_exact"] = num(k_ex);
  res.metrics["k_rel_error"] = num(rel_err(k_emp, k.k));
  res.metrics["k_exact_rel_error"] = num(rel_err(k_ex, k.k));
  res.metrics["max_abs_record"] = zero_scale;
  res.diagnostics["travel_time"] = tau;
  res.diagnostics["fit_window"] = {lo, hi};

  write_csv(out.path("records/c_ab.csv"), cab);
  out.write_json("records/c_ab.json", record_metadata(cab));
  if (with_exact) {
    write_csv(out.path("records/c_ab_exact.csv"), ex);
    write_overlay_csv(out.path("overlays/asymmetry.csv"), {"empirical", "exact"}, {&cab, &ex});
  }
  out.write_json("asymmetry.json", {{"k", num(k.k)},
                                    {"m_ab", k.m_ab},
                                    {"m_ba", k.m_ba},
                                    {"one_sided", k.one_sided},
                                    {"k_empirical", num(k_emp)},
                                    {"k_exact", num(k_ex)},
                                    {"notes", k.notes}});
  return res;
}

Result predictor_vs_empirical(const ExperimentConfig& c, std::uint64_t seed, const RunOptions& opt, Outputs& out) {
  Result res;
  if (c.dim != 1) throw InvalidArgument("predictor-vs-empirical: the predictor is one-dimensional");
  std::vector<double> eps_list{c.epsilon};
  if (c.params.contains("epsilons")) {
    eps_list = c.params.at("epsilons").get<std::vector<double>>();
    if (eps_list.empty()) throw InvalidArgument("predictor-vs-empirical: params.epsilons is empty");
  }
  LagWindow win{0.2 * c.tau_max, c.tau_max, 0};
  if (c.params.contains("window")) {
    const Eigen::Vector2d v = vec2(c.params.at("window"), "params.window");
    win = {v[0], v[1], 0};
  }
  const bool with_exact = c.params.value("include_exact", true);
  WaveSetup w = wave_setup(c, opt, res);

  json by_eps = json::array(), exact_by_eps = json::array();
  double first = kNaN, last = kNaN, scale = 0;
  CompareMetrics finest;
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    const std::string tag = "eps_" + std::to_string(i);
    const std::string label = "eps=" + format_double(eps_list[i]) + ": ";
    const PhaseSpaceContext ctx = make_context(c, eps_list[i]);
    const NoiseModel nm = make_noise(c, ctx, seed, w.dt);
    const CorrelationRecord emp = simulate_correlation(w.medium, nm, w.a, w.b, w.sim);
    res.warn(emp.warnings, label + "empirical: ");
    scale = std::max(scale, max_abs(emp));
    const PredictedSymbol pb = pi_bar(w.medium, nm);
    res.warn(pb.warnings, label + "pi_bar: ");
    const CorrelationRecord pred = predict_correlation(w.medium, pb, w.a, w.b, c.tau_max, emp.dtau);
    res.warn(pred.warnings, label + "predictor: ");
    const CompareMetrics m = compare(pred, emp, win);
    by_eps.push_back(num(m.relative_l2));
    if (i == 0) first = m.relative_l2;
    last = m.relative_l2;
    finest = m;

    std::vector<std::string> names{"empirical", "semiclassical"};
    std::vector<const CorrelationRecord*> recs{&emp, &pred};
    CorrelationRecord ex;
    if (with_exact) {
      ExactOptions eo;
      eo.dt = w.dt;
      ex = exact_correlation(w.medium, nm, w.a, w.b, c.tau_max, eo);
      res.warn(ex.warnings, label + "exact: ");
      exact_by_eps.push_back(num(compare(pred, ex, win).relative_l2));
      names.push_back("exact");
      recs.push_back(&ex);
      write_csv(out.path("records/exact_" + tag + ".csv"), ex);
    }
    json d{{"epsilon", eps_list[i]},
           {"noise_rank", nm.rank()},
           {"masked_fraction", pb.masked_fraction()},
           {"horizon", pb.horizon},
           {"ray_dt", pb.ray_dt}};
    res.diagnostics["runs"].push_back(d);
    write_csv(out.path("records/empirical_" + tag + ".csv"), emp);
    write_csv(out.path("records/semiclassical_" + tag + ".csv"), pred);
    write_overlay_csv(out.path("overlays/" + tag + ".csv"), names, recs);
    save_symbol(out.path("fields/pi_bar_" + tag + ".scgrid"), pb.pi_bar);
  }
  res.metrics["rel_l2"] = num(last);
  res.metrics["rel_l2_by_epsilon"] = by_eps;
  res.metrics["exact_rel_l2"] = exact_by_eps.empty() ? json(nullptr) : exact_by_eps.back();
  res.metrics["exact_rel_l2_by_epsilon"] = exact_by_eps;
  res.metrics["refinement_ratio"] = eps_list.size() > 1 ? num(last / first) : json(nullptr);
  res.metrics["amplitude_ratio"] = num(finest.amplitude_ratio);
  res.metrics["peak_shift"] = finest.peak_shift_samples;
  res.metrics["max_abs_record"] = scale;
  res.diagnostics["epsilons"] = eps_list;
  res.diagnostics["compare_window"] = {win.lo, win.hi};
  return res;
}

Result dispersion_inversion(const ExperimentConfig& c, std::uint64_t seed, Outputs& out) {
  Result res;
  const json& p = c.params;
  const double depth = number(p, "depth", 1.0);
  const std::string surface = p.value("surface", std::string("neumann"));
  if (surface != "neumann" && surface != "dirichlet")
    throw InvalidArgument("dispersion-inversion: params.surface must be neumann or dirichlet");
  const ProfileFamily fam =
      two_layer_family(depth, surface == "neumann" ? SurfaceBC::Neumann : SurfaceBC::Dirichlet);
  auto theta = [&](const char* key, std::vector<double> fallback) {
    const std::vector<double> v = p.contains(key) ? p.at(key).get<std::vector<double>>() : fallback;
    if (v.size() != 3) throw InvalidArgument(std::string("dispersion-inversion: params.") + key + " needs 3 entries");
    return Eigen::Vector3d(v[0], v[1], v[2]);
  };
  const Eigen::Vector3d truth = theta("truth", {1.0, 4.0, 0.5 * depth});
  const Eigen::Vector3d start = theta("start", {1.3, 2.8, 0.65 * depth});
  const std::vector<double> xs = p.value("xi", std::vector<double>{0.5, 12.0, 24});
  if (xs.size() != 3 || xs[2] < 2) throw InvalidArgument("dispersion-inversion: params.xi is [lo, hi, count]");
  const Eigen::VectorXd xi = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(xs[2]), xs[0], xs[1]);
  const int points = p.value("points", 128);
  const int branch = p.value("branch", 0);
  const double level = number(p, "noise_level", 0.01);
  if (level < 0) throw InvalidArgument("dispersion-inversion: noise_level must be >= 0");
  InversionOptions io;
  io.starts = p.value("starts", io.starts);
  io.relative_misfit = p.value("relative_misfit", true);

  const DepthProfile true_prof = fam.make(truth);
  const DispersionCurve clean = dispersion_curve(true_prof, xi, branch, points);
  res.warn(clean.warnings, "target: ");
  write_csv(out.path("profiles/truth.csv"), true_prof, points);
  write_csv(out.path("curves/target_clean.csv"), clean);

  auto invert = [&](const DispersionCurve& target, const std::string& tag) {
    const InversionReport r = invert_profile(target, fam, start, io);
    res.warn(r.notes, tag + " inversion: ");
    if (!r.converged) res.warnings.push_back(tag + " inversion did not converge");
    const double speed = std::max(rel_err(std::sqrt(r.theta(0)), std::sqrt(truth(0))),
                                  rel_err(std::sqrt(r.theta(1)), std::sqrt(truth(1))));
    res.metrics["speed_error_" + tag] = speed;
    res.metrics["interface_error_" + tag] = std::abs(r.theta(2) - truth(2));
    res.metrics["residual_" + tag] = r.residual;
    write_csv(out.path("profiles/recovered_" + tag + ".csv"), r.profile, points);
    write_csv(out.path("curves/fitted_" + tag + ".csv"), dispersion_curve(r.profile, xi, branch, target.points));
    out.write_json("inversion_" + tag + ".json", r.to_json(fam));
  };
  invert(clean, "clean");
  if (level > 0) {
    DispersionCurve noisy = clean;
    CounterRng rng(seed, 0x44495350);
    for (Eigen::Index i = 0; i < noisy.values.size(); ++i) noisy.values(i) *= 1 + level * rng.normal();
    const Eigen::ArrayXd dev = (noisy.values - clean.values).array();
    res.metrics["noise_floor"] = io.relative_misfit
                                     ? std::sqrt((dev / noisy.values.array()).square().mean())
                                     : dev.matrix().norm() / noisy.values.norm();
    write_csv(out.path("curves/target_noisy.csv"), noisy);
    invert(noisy, "noisy");
  } else {
    for (const char* k : {"speed_error_noisy", "interface_error_noisy", "residual_noisy", "noise_floor"})
      res.metrics[k] = nullptr;
  }
  res.diagnostics["truth"] = {truth(0), truth(1), truth(2)};
  res.diagnostics["start"] = {start(0), start(1), start(2)};
  res.diagnostics["points"] = points;
  return res;
}

Result scattering_identity(const ExperimentConfig& c, Outputs& out) {
  Result res;
  const json& p = c.params;
  const double n0 = number(p, "n0", 1.0), omega = number(p, "omega", 4.0), len = number(p, "length", 6.0);
  const double layer = number(p, "layer", 1.6);
  const int cells = p.value("cells", 192), n_dirs = p.value("n_dirs", 128), far = p.value("far_samples", 64);
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> pairs;
  if (!p.contains("pairs") || !p.at("pairs").is_array() || p.at("pairs").empty())
    throw InvalidArgument("scattering-identity: params.pairs must list [x, y] point pairs");
  for (const auto& pr : p.at("pairs")) {
    if (!pr.is_array() || pr.size() != 2) throw InvalidArgument("scattering-identity: each pair is [x, y]");
    pairs.emplace_back(vec2(pr[0], "pair point"), vec2(pr[1], "pair point"));
  }

  std::ofstream csv(out.path("identity.csv"));
  csv << "medium,x0,x1,y0,y1,lhs_re,lhs_im,rhs,relative_error\n";
  json reports = json::array();
  auto run_pairs = [&](const HelmholtzSolver& solver, const std::string& tag) {
    double worst = 0;
    for (const auto& [x, y] : pairs) {
      const ImGReport r = verify_im_g_identity(solver, x, y, n_dirs);
      res.warn(r.warnings, tag + ": ");
      worst = std::max(worst, r.relative_error);
      csv << tag << ',' << format_double(x[0]) << ',' << format_double(x[1]) << ',' << format_double(y[0]) << ','
          << format_double(y[1]) << ',' << format_double(r.lhs.real()) << ',' << format_double(r.lhs.imag()) << ','
          << format_double(r.rhs) << ',' << format_double(r.relative_error) << '\n';
      json j = r.to_json();
      j["medium"] = tag;
      reports.push_back(j);
    }
    return worst;
  };

  const HelmholtzSolver free_solver(HelmholtzSetup::free_space(n0, omega, len, cells, layer));
  res.metrics["free_space_max_rel_error"] = run_pairs(free_solver, "free");
  res.metrics["disk_max_rel_error"] = nullptr;
  res.metrics["far_field_rel_error"] = nullptr;
  if (p.contains("disk")) {
    const json& d = p.at("disk");
    const double n_in = number(d, "n_inside", 0.7), radius = number(d, "radius", 0.5);
    const Eigen::Vector2d center = d.contains("center") ? vec2(d.at("center"), "disk.center") : Eigen::Vector2d::Zero();
    const HelmholtzSolver disk_solver(HelmholtzSetup::disk(n0, n_in, radius, center, omega, len, cells, layer));
    res.metrics["disk_max_rel_error"] = run_pairs(disk_solver, "disk");
    const ScatteringSolution sol = solve_scattering(disk_solver, {1.0, 0.0}, far);
    write_csv(out.path("far_field/computed.csv"), sol);
    res.diagnostics["solver_residual"] = disk_solver.last_residual();
    if (center.norm() == 0) {
      // The partial-wave series is centred on the origin.
      const Eigen::VectorXcd ref = disk_far_field(n0, n_in, radius, omega, sol.far_angles);
      ScatteringSolution r = sol;
      r.far_field = ref;
      write_csv(out.path("far_field/partial_waves.csv"), r);
      const Eigen::VectorXd a = sol.far_field.cwiseAbs(), b = ref.cwiseAbs();
      res.metrics["far_field_rel_error"] = (a - b).norm() / b.norm();
    }
  }
  csv.close();
  out.write_json("identity.json", reports);
  res.diagnostics["cells"] = cells;
  res.diagnostics["h"] = len / cells;
  res.diagnostics["points_per_wavelength"] = 2 * std::numbers::pi / (omega / std::sqrt(n0)) / (len / cells);
  return res;
}

void prepare_output_dir(const fs::path& dir) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw InvalidArgument("output path '" + dir.string() + "' is not a directory");
    if (!fs::is_empty(dir)) {
      if (!fs::exists(dir / "manifest.json"))
        throw InvalidArgument("output directory '" + dir.string() + "' is not empty and holds no previous run");
      for (const auto& e : fs::directory_iterator(dir)) fs::remove_all(e.path());
    }
  }
  fs::create_directories(dir);
}

std::vector<ManifestEntry> list_files(const fs::path& dir) {
  std::vector<ManifestEntry> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == "manifest.json") continue;
    files.push_back({rel, sha256_file(e.path().string()), e.file_size()});
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return files;
}

ThresholdCheck check(const std::string& metric, const json& bound, const json& metrics) {
  ThresholdCheck c;
  c.metric = metric;
  if (bound.is_number()) {
    c.max = bound.get<double>();
  } else {
    if (bound.contains("min")) c.min = bound.at("min").get<double>();
    if (bound.contains("max")) c.max = bound.at("max").get<double>();
  }
  const json& v = metrics.at(metric);
  if (!v.is_number()) {
    c.value = kNaN;
    c.skipped = true;
    c.passed = true;
    return c;
  }
  c.value = v.get<double>();
  c.passed = (!c.min || c.value >= *c.min) && (!c.max || c.value <= *c.max);
  return c;
}

}  // namespace

// ---- config ---------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("config: top level must be a JSON object");
  static const std::set<std::string> known = {
      "schema_version", "scenario", "seed",  "output_dir", "grid",  "medium",  "noise",     "receivers",
      "tau_max",        "window",   "burn_in", "ensemble",  "batch", "cfl",     "params",    "thresholds"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw InvalidArgument("config: unknown key '" + k + "'");
  ExperimentConfig c;
  try {
    if (!j.contains("schema_version")) throw InvalidArgument("config: schema_version is required");
    c.schema_version = j.at("schema_version").get<int>();
    if (!j.contains("scenario") || !j.at("scenario").is_string())
      throw InvalidArgument("config: scenario (string) is required");
    c.scenario = j.at("scenario").get<std::string>();
    if (j.contains("seed") && !j.at("seed").is_null()) {
      const json& s = j.at("seed");
      if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<long long>() < 0)) throw InvalidArgument("config: seed must be a non-negative integer");
      c.seed = s.get<std::uint64_t>();
    }
    c.output_dir = j.value("output_dir", std::string());
    if (j.contains("grid")) {
      const json& g = j.at("grid");
      for (const auto& [k, v] : g.items())
        if (k != "dim" && k != "n" && k != "length" && k != "epsilon")
          throw InvalidArgument("config: unknown key 'grid." + k + "'");
      c.dim = g.value("dim", c.dim);
      c.n = g.value("n", c.n);
      c.length = g.value("length", c.length);
      c.epsilon = g.value("epsilon", c.epsilon);
    }
    c.medium = j.value("medium", json());
    c.noise = j.value("noise", json());
    if (j.contains("receivers")) {
      if (!j.at("receivers").is_array()) throw InvalidArgument("config: receivers must be an array of points");
      for (const auto& r : j.at("receivers")) c.receivers.push_back(vec2(r, "receiver"));
    }
    c.tau_max = j.value("tau_max", c.tau_max);
    c.window = j.value("window", c.window);
    c.burn_in = j.value("burn_in", c.burn_in);
    c.ensemble = j.value("ensemble", c.ensemble);
    c.batch = j.value("batch", c.batch);
    c.cfl = j.value("cfl", c.cfl);
    c.params = j.value("params", json::object());
    c.thresholds = j.value("thresholds", json::object());
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw InvalidArgument("config '" + path + "': " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j{{"schema_version", schema_version},
         {"scenario", scenario},
         {"grid", {{"dim", dim}, {"n", n}, {"length", length}, {"epsilon", epsilon}}},
         {"tau_max", tau_max},
         {"window", window},
         {"burn_in", burn_in},
         {"ensemble", ensemble},
         {"batch", batch},
         {"cfl", cfl},
         {"params", params},
         {"thresholds", thresholds}};
  if (seed) j["seed"] = *seed;
  if (!output_dir.empty()) j["output_dir"] = output_dir;
  if (!medium.is_null()) j["medium"] = medium;
  if (!noise.is_null()) j["noise"] = noise;
  if (!receivers.empty()) {
    j["receivers"] = json::array();
    for (const auto& r : receivers) j["receivers"].push_back(vec_json(r, dim));
  }
  return j;
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("output_dir");  // where results go does not change them
  return sha256_hex(j.dump());
}

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion)
    throw InvalidArgument("config: schema_version " + std::to_string(schema_version) + " is not supported (expected " +
                          std::to_string(kConfigSchemaVersion) + ")");
  const ScenarioDef& def = scenario_def(scenario);
  if (!params.is_object()) throw InvalidArgument("config: params must be an object");
  if (!thresholds.is_object()) throw InvalidArgument("config: thresholds must be an object");
  for (const auto& [k, v] : thresholds.items()) {
    if (std::find(def.metrics.begin(), def.metrics.end(), k) == def.metrics.end())
      throw InvalidArgument("config: scenario '" + scenario + "' has no metric '" + k + "'");
    const bool ok = v.is_number() ||
                    (v.is_object() && !v.empty() && std::all_of(v.items().begin(), v.items().end(), [](const auto& e) {
                       return (e.key() == "min" || e.key() == "max") && e.value().is_number();
                     }));
    if (!ok) throw InvalidArgument("config: threshold '" + k + "' must be a number or {min, max}");
  }
  if (!def.wave) return;
  if (dim != 1 && dim != 2) throw InvalidArgument("config: grid.dim must be 1 or 2");
  require_positive(length, "grid.length");
  require_positive(epsilon, "grid.epsilon");
  PhaseSpaceContext(dim, n, length, epsilon).validate();
  require_positive(tau_max, "tau_max");
  if (!(window >= 0)) throw InvalidArgument("config: window must be >= 0");
  if (window > 0 && window < 10 * tau_max) throw InvalidArgument("config: window must be 0 or at least 10 tau_max");
  if (ensemble < 1) throw InvalidArgument("config: ensemble must be >= 1");
  if (batch < 1) throw InvalidArgument("config: batch must be >= 1");
  if (!(cfl > 0 && cfl <= kDefaultCfl))
    throw InvalidArgument("config: cfl must lie in (0, " + format_double(kDefaultCfl) + "]");
  if (!medium.is_object() || !medium.contains("preset")) throw InvalidArgument("config: medium.preset is required");
  if (!noise.is_object() || !noise.contains("preset")) throw InvalidArgument("config: noise.preset is required");
  if (medium.contains("n0")) require_positive(number(medium, "n0", 1), "medium.n0");
  if (number(medium, "a0", 0) < 0) throw InvalidArgument("config: medium.a0 must be >= 0");
  if (number(noise, "level", 1) < 0) throw InvalidArgument("config: noise.level must be >= 0");
  if (receivers.size() != 2) throw InvalidArgument("config: receivers must hold exactly two points [A, B]");
}

std::vector<ScenarioInfo> list_scenarios() {
  std::vector<ScenarioInfo> out;
  for (const auto& d : scenarios()) out.push_back({d.name, d.description});
  return out;
}

ExperimentConfig scenario_preset(const std::string& name) {
  scenario_def(name);
  json j;
  if (name == "white-noise-identity") {
    j = {{"grid", {{"dim", 1}, {"n", 128}, {"length", 1.0}, {"epsilon", 0.01}}},
         {"medium", {{"preset", "homogeneous"}, {"n0", 1.0}, {"a0", 0.5}}},
         {"noise", {{"preset", "flat"}, {"level", 1.0}}},
         {"receivers", {{0.25}, {0.5}}},
         {"tau_max", 1.0},
         {"window", 200.0},
         {"burn_in", 20.0},
         {"ensemble", 32},
         {"params", {{"near_field", 0.2}}},
         {"thresholds", {{"identity_rel_l2", 0.10}, {"reflection_rel_l2", 0.02}}}};
  } else if (name == "localized-source-asymmetry") {
    j = {{"grid", {{"dim", 1}, {"n", 128}, {"length", 4.0}, {"epsilon", 0.05}}},
         {"medium", {{"preset", "homogeneous"}, {"n0", 1.0}, {"a0", 0.5}}},
         {"noise",
          {{"preset", "half-domain"},
           {"lo", 0.8},
           {"hi", 1.6},
           {"edge", 0.05},
           {"xi_center", 1.0},
           {"xi_halfwidth", 0.5},
           {"rank_tolerance", 1e-8}}},
         {"receivers", {{2.5}, {2.0}}},
         {"tau_max", 1.0},
         {"window", 200.0},
         {"burn_in", 20.0},
         {"ensemble", 32},
         {"params", {{"travel_time", 0.5}, {"fit_window", {0.3, 0.7}}}},
         {"thresholds", {{"k_rel_error", 0.20}}}};
  } else if (name == "predictor-vs-empirical") {
    j = {{"grid", {{"dim", 1}, {"n", 512}, {"length", 1.0}, {"epsilon", 0.02}}},
         {"medium", {{"preset", "homogeneous"}, {"n0", 1.0}, {"a0", 5.0}}},
         {"noise",
          {{"preset", "half-domain"},
           {"lo", 0.05},
           {"hi", 0.45},
           {"edge", 0.02},
           {"xi_center", 1.0},
           {"xi_halfwidth", 0.5},
           {"rank_tolerance", 1e-6}}},
         {"receivers", {{0.75}, {0.6}}},
         {"tau_max", 0.25},
         {"window", 50.0},
         {"burn_in", 2.0},
         {"ensemble", 64},
         {"params", {{"epsilons", {0.02, 0.01}}, {"window", {0.05, 0.25}}, {"include_exact", true}}},
         {"thresholds", {{"rel_l2", 0.15}, {"refinement_ratio", 1.0}}}};
  } else if (name == "dispersion-inversion") {
    j = {{"params",
          {{"depth", 1.0},
           {"surface", "neumann"},
           {"truth", {1.0, 4.0, 0.5}},
           {"start", {1.3, 2.8, 0.65}},
           {"xi", {0.5, 12.0, 24}},
           {"points", 128},
           {"noise_level", 0.01},
           {"relative_misfit", true}}},
         {"thresholds", {{"speed_error_clean", 0.01}, {"speed_error_noisy", 0.05}}}};
  } else {
    j = {{"params",
          {{"n0", 1.0},
           {"omega", 4.0},
           {"length", 6.0},
           {"cells", 192},
           {"layer", 1.6},
           {"disk", {{"n_inside", 0.7}, {"radius", 0.5}, {"center", {0.0, 0.0}}}},
           {"pairs", {{{0.75, 0.0}, {-0.75, 0.0}}, {{0.0, 0.8}, {0.6, -0.6}}, {{0.2, 0.1}, {-0.9, 0.5}}}},
           {"n_dirs", 128},
           {"far_samples", 64}}},
         {"thresholds", {{"free_space_max_rel_error", 1e-6}, {"disk_max_rel_error", 0.03}}}};
  }
  j["schema_version"] = kConfigSchemaVersion;
  j["scenario"] = name;
  return ExperimentConfig::from_json(j);
}

// ---- run ------------------------------------------------------------------------

json RunManifest::to_json() const {
  json files_j = json::array();
  for (const auto& f : files) files_j.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  json checks_j = json::array();
  for (const auto& c : checks) {
    json e{{"metric", c.metric}, {"value", num(c.value)}, {"passed", c.passed}, {"skipped", c.skipped}};
    if (c.min) e["min"] = *c.min;
    if (c.max) e["max"] = *c.max;
    checks_j.push_back(e);
  }
  return {{"scenario", scenario},
          {"config_hash", config_hash},
          {"code_version", code_version},
          {"seed", seed},
          {"output_dir", output_dir},
          {"files", files_j},
          {"wall_clock_seconds", wall_clock_seconds},
          {"warnings", warnings},
          {"metrics", metrics},
          {"diagnostics", diagnostics},
          {"checks", checks_j},
          {"passed", passed ? json(*passed) : json(nullptr)}};
}

RunManifest run(const ExperimentConfig& config, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = config;
  if (opt.seed) cfg.seed = opt.seed;
  if (!cfg.seed) throw InvalidArgument("run: a seed is mandatory (config 'seed' or --seed)");
  if (!opt.output_dir.empty()) cfg.output_dir = opt.output_dir;
  if (cfg.output_dir.empty()) throw InvalidArgument("run: no output directory given");
  if (opt.threads < 1) throw InvalidArgument("run: threads must be >= 1");
  cfg.validate();
  const std::uint64_t seed = *cfg.seed;

  const fs::path dir(cfg.output_dir);
  prepare_output_dir(dir);
  Outputs out(dir);
  out.write_json("config.json", cfg.to_json());

  Result res;
  try {
    if (cfg.scenario == "white-noise-identity") {
      res = white_noise_identity(cfg, seed, opt, out);
    } else if (cfg.scenario == "localized-source-asymmetry") {
      res = localized_source_asymmetry(cfg, seed, opt, out);
    } else if (cfg.scenario == "predictor-vs-empirical") {
      res = predictor_vs_empirical(cfg, seed, opt, out);
    } else if (cfg.scenario == "dispersion-inversion") {
      res = dispersion_inversion(cfg, seed, out);
    } else {
      res = scattering_identity(cfg, out);
    }
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(cfg.scenario + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(cfg.scenario + ": " + e.what());
  } catch (const SizeLimit& e) {
    throw SizeLimit(cfg.scenario + ": " + e.what());
  }

  RunManifest m;
  m.scenario = cfg.scenario;
  m.config_hash = cfg.hash();
  m.code_version = SEMICORR_VERSION;
  m.seed = seed;
  m.output_dir = dir.string();
  m.warnings = std::move(res.warnings);
  m.metrics = std::move(res.metrics);
  m.diagnostics = std::move(res.diagnostics);
  for (const auto& [k, v] : cfg.thresholds.items()) m.checks.push_back(check(k, v, m.metrics));
  if (!m.checks.empty())
    m.passed = std::all_of(m.checks.begin(), m.checks.end(), [](const auto& c) { return c.passed; });
  m.files = list_files(dir);
  m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream os(dir / "manifest.json");
  if (!os) throw InvalidArgument("cannot write manifest in '" + dir.string() + "'");
  os << m.to_json().dump(2) << '\n';
  return m;
}

int exit_code(const RunManifest& m, bool strict) {
  if (m.passed && !*m.passed) return 1;
  if (strict && !m.warnings.empty()) return 3;
  return 0;
}

// ---- compare --------------------------------------------------------------------

CompareMetrics compare(const CorrelationRecord& x, const CorrelationRecord& ref, const LagWindow& w) {
  if (!(x.dtau > 0) || !(ref.dtau > 0)) throw InvalidArgument("compare: records need a positive lag step");
  if (!(w.lo >= 0 && w.hi >= w.lo)) throw InvalidArgument("compare: window needs 0 <= lo <= hi");
  const long jx = x.half_width(), jr = ref.half_width();
  const double x_end = jx * x.dtau;
  const bool same_grid = std::abs(x.dtau - ref.dtau) <= 1e-12 * ref.dtau;
  std::vector<double> xv, rv;
  std::vector<long> lags;
  for (long l = -jr; l <= jr; ++l) {
    const double t = ref.tau(l);
    const double at = std::abs(t);
    if (at < w.lo - 1e-12 * ref.dtau || at > w.hi + 1e-12 * ref.dtau) continue;
    if ((w.sign > 0 && t <= 0) || (w.sign < 0 && t >= 0)) continue;
    double v;
    if (same_grid) {
      if (std::abs(l) > jx) continue;
      v = x.at(l);
    } else {
      if (at > x_end * (1 + 1e-12)) continue;
      const double s = std::clamp(t / x.dtau, static_cast<double>(-jx), static_cast<double>(jx));
      const long k = std::min(static_cast<long>(std::floor(s)), jx - 1);
      const double f = s - static_cast<double>(k);
      v = (1 - f) * x.at(k) + f * x.at(k + 1);
    }
    xv.push_back(v);
    rv.push_back(ref.at(l));
    lags.push_back(l);
  }
  if (xv.empty())
    throw InvalidArgument("compare: window [" + format_double(w.lo) + ", " + format_double(w.hi) +
                          "] holds no lags common to both records");
  const Eigen::Map<const Eigen::VectorXd> a(xv.data(), static_cast<Eigen::Index>(xv.size()));
  const Eigen::Map<const Eigen::VectorXd> b(rv.data(), static_cast<Eigen::Index>(rv.size()));
  CompareMetrics m;
  m.samples = static_cast<long>(xv.size());
  const double rn = b.norm(), dn = (a - b).norm();
  m.relative_l2 = rn > 0 ? dn / rn : (dn == 0 ? 0.0 : std::numeric_limits<double>::infinity());
  m.amplitude_ratio = rn > 0 ? a.dot(b) / (rn * rn) : kNaN;
  Eigen::Index ia = 0, ib = 0;
  a.cwiseAbs().maxCoeff(&ia);
  b.cwiseAbs().maxCoeff(&ib);
  m.peak_shift_samples = lags[static_cast<std::size_t>(ia)] - lags[static_cast<std::size_t>(ib)];
  m.peak_shift_time = static_cast<double>(m.peak_shift_samples) * ref.dtau;
  return m;
}

std::vector<CompareMetrics> compare(const std::vector<CorrelationRecord>& records, const LagWindow& w) {
  if (records.size() < 2) throw InvalidArgument("compare: need at least two records");
  std::vector<CompareMetrics> out;
  for (std::size_t i = 1; i < records.size(); ++i) out.push_back(compare(records[i], records[0], w));
  return out;
}

json to_json(const CompareMetrics& m) {
  return {{"relative_l2", num(m.relative_l2)},
          {"peak_shift_samples", m.peak_shift_samples},
          {"peak_shift_time", m.peak_shift_time},
          {"amplitude_ratio", num(m.amplitude_ratio)},
          {"samples", m.samples}};
}

CorrelationRecord read_record_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open record '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || line.rfind("tau,value", 0) != 0)
    throw InvalidArgument("record '" + path + "': expected a tau,value[,provenance] header");
  std::vector<double> taus, vals;
  std::string prov;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string t, v, p;
    std::getline(ss, t, ',');
    std::getline(ss, v, ',');
    std::getline(ss, p, ',');
    try {
      taus.push_back(std::stod(t));
      vals.push_back(std::stod(v));
    } catch (const std::exception&) {
      throw InvalidArgument("record '" + path + "': bad row '" + line + "'");
    }
    if (prov.empty()) prov = p;
  }
  const auto n = static_cast<long>(taus.size());
  if (n < 3 || n % 2 == 0) throw InvalidArgument("record '" + path + "': needs an odd number (>= 3) of lags");
  CorrelationRecord r;
  r.dtau = (taus.back() - taus.front()) / static_cast<double>(n - 1);
  const long j = (n - 1) / 2;
  for (long l = -j; l <= j; ++l)
    if (std::abs(taus[static_cast<std::size_t>(l + j)] - l * r.dtau) > 1e-9 * r.dtau * std::max(1L, std::abs(l)))
      throw InvalidArgument("record '" + path + "': lags must be symmetric and evenly spaced");
  r.values = Eigen::Map<const Eigen::VectorXd>(vals.data(), n);
  if (prov == "exact") r.provenance = Provenance::Exact;
  else if (prov == "semiclassical") r.provenance = Provenance::Semiclassical;
  else r.provenance = Provenance::Empirical;
  return r;
}

}  // namespace semicorr
