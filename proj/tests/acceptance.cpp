// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "semicorr/error.hpp"
#include "semicorr/experiments.hpp"
#include "semicorr/noise.hpp"
#include "semicorr/phase_space.hpp"
#include "semicorr/rays.hpp"
#include "semicorr/semiclassical.hpp"
#include "semicorr/surface_waves.hpp"
#include "test_util.hpp"

using namespace semicorr;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kIdentityTol = 0.10;
constexpr double kIdentityRuntime = 300;
constexpr double kReflectionTol = 0.02;
constexpr double kPredictorTol = 0.15;
constexpr double kPredictorRuntime = 900;
constexpr double kAsymmetryTol = 0.20;
constexpr double kMGammaTol = 1e-8;
constexpr double kMarginalTol = 1e-10;
constexpr double kRoundTripTol = 1e-12;
constexpr double kCommutatorOrder = 1.8;
constexpr double kClosedFormTol = 1e-10;
constexpr double kHamiltonianTol = 1e-8;
constexpr double kRkOrder = 3.8;
constexpr double kDirichletOrderLo = 1.9, kDirichletOrderHi = 2.1;
constexpr double kSpeedClean = 0.01, kSpeedNoisy = 0.05;
constexpr double kFreeSpaceTol = 1e-6, kDiskTol = 0.03;
constexpr double kScatteringRuntime = 300;

constexpr std::uint64_t kSeed = 1;
constexpr std::uint64_t kDispersionSeed = 3;

fs::path scratch;
int failures = 0;

void report(const std::string& id, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void criterion(const std::string& id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct Timed {
  RunManifest manifest;
  double seconds = 0;
};

Timed run_preset(ExperimentConfig cfg, const std::string& tag, std::uint64_t seed) {
  RunOptions opt;
  opt.seed = seed;
  opt.output_dir = (scratch / tag).string();
  const auto t0 = std::chrono::steady_clock::now();
  Timed r{run(cfg, opt), 0};
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

double metric(const RunManifest& m, const std::string& key) { return m.metrics.at(key).get<double>(); }

// Every output except the echoed config, which records the output directory.
std::map<std::string, std::string> checksums(const RunManifest& m) {
  std::map<std::string, std::string> out;
  for (const auto& f : m.files)
    if (f.path != "config.json") out[f.path] = f.sha256;
  return out;
}

GridFunction packet(const PhaseSpaceContext& c, double x0, double s, int k) {
  GridFunction u(c);
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double x = c.grid.coord(j);
    u.values(j) = std::exp(-(x - x0) * (x - x0) / (2 * s * s)) * std::polar(1.0, 2 * pi * k * x);
  }
  return u;
}

double commutator_residual(double eps) {
  const PhaseSpaceContext c(1, 128, 1.0, eps);
  const Symbol a = Symbol::sample(c, [](const Eigen::Vector2d& x, const Eigen::Vector2d& xi) {
    return std::exp(-std::pow((x[0] - 0.45) / 0.1, 2) - std::pow((xi[0] - 0.3) / 0.5, 2));
  });
  const Symbol b = Symbol::sample(c, [](const Eigen::Vector2d& x, const Eigen::Vector2d& xi) {
    return std::exp(-std::pow((x[0] - 0.55) / 0.12, 2) - std::pow((xi[0] + 0.1) / 0.6, 2)) * (1 + 0.5 * xi[0]);
  });
  const Eigen::MatrixXcd A = weyl_matrix(a), B = weyl_matrix(b);
  const Eigen::MatrixXcd P = weyl_matrix(poisson_bracket(a, b));
  return testutil::op_norm(A * B - B * A - cplx(0, -eps) * P);
}

PhasePoint pp(double x0, double x1, double k0, double k1) {
  PhasePoint z;
  z.x = {x0, x1};
  z.xi = {k0, k1};
  return z;
}

Eigen::Vector4d vec(const RaySample& s) { return {s.z.x[0], s.z.x[1], s.z.xi[0], s.z.xi[1]}; }

}  // namespace

int main() {
  scratch = fs::temp_directory_path() /
            ("semicorr_acceptance_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  fs::create_directories(scratch);

  std::map<std::string, std::string> white_sums, asym_sums, disp_sums;

  criterion("C1 white-noise identity", [&] {
    const auto r = run_preset(scenario_preset("white-noise-identity"), "white", kSeed);
    white_sums = checksums(r.manifest);
    const double rel = metric(r.manifest, "identity_rel_l2");
    report("C1 white-noise identity", rel <= kIdentityTol && r.seconds <= kIdentityRuntime,
           fmt("rel_l2 %.4f", rel) + fmt(" (tol %.2f)", kIdentityTol) + fmt(", %.1f s", r.seconds));

    // C2 uses the same record plus a run twice as long.
    const double l200 = metric(r.manifest, "reflection_rel_l2");
    auto cfg = scenario_preset("white-noise-identity");
    cfg.window *= 2;
    const auto r2 = run_preset(cfg, "white_long", kSeed);
    const double l400 = metric(r2.manifest, "reflection_rel_l2");
    report("C2 reflection symmetry", l200 <= kReflectionTol && l400 < l200,
           fmt("rel_l2 %.5f at T=200", l200) + fmt(", %.5f at T=400", l400) + fmt(" (tol %.2f)", kReflectionTol));
  });

  criterion("C3 predictor vs empirical", [&] {
    const auto r = run_preset(scenario_preset("predictor-vs-empirical"), "predictor", kSeed);
    const double rel = metric(r.manifest, "rel_l2"), ratio = metric(r.manifest, "refinement_ratio");
    report("C3 predictor vs empirical", rel <= kPredictorTol && ratio < 1 && r.seconds <= kPredictorRuntime,
           fmt("rel_l2 %.4f", rel) + fmt(" (tol %.2f)", kPredictorTol) + fmt(", refinement ratio %.3f", ratio) +
               fmt(", %.1f s", r.seconds));
  });

  criterion("C4 asymmetry factor", [&] {
    const auto r = run_preset(scenario_preset("localized-source-asymmetry"), "asym", kSeed);
    asym_sums = checksums(r.manifest);
    const double err = metric(r.manifest, "k_rel_error");
    report("C4 asymmetry factor", err <= kAsymmetryTol,
           fmt("k predicted %.4f", metric(r.manifest, "k_predicted")) +
               fmt(", empirical %.4f", metric(r.manifest, "k_empirical")) + fmt(", rel error %.4f", err));
  });

  criterion("C5 M_gamma white noise", [&] {
    const PhaseSpaceContext ctx(1, 32, 1.0, 0.05);
    double worst = 0;
    for (double a0 : {0.3, 0.5, 0.7, 2.0}) {
      const Medium m = Medium::homogeneous(1, 1.0, a0);
      const NoiseModel nm(ctx, PowerSpectrum::white(1.0), 1, 1.0);
      const auto rays = shoot(m, {0.3, 0}, {0.6, 0}, 0.3);
      if (rays.size() != 1) throw Error("expected one ray");
      worst = std::max(worst, std::abs(m_gamma(rays[0], nm, m).m_gamma + 1 / (2 * a0)));
    }
    report("C5 M_gamma white noise", worst <= kMGammaTol, fmt("max |M + 1/(2a0)| %.3g", worst));
  });

  criterion("C6 phase-space calculus", [&] {
    const PhaseSpaceContext c(1, 128, 1.0, 0.01);
    GridFunction u = packet(c, 0.4, 0.06, 9);
    u.values += 0.5 * packet(c, 0.7, 0.03, -14).values;
    const auto w = wigner(u);
    const Eigen::VectorXd dens = u.values.cwiseAbs2();
    const Eigen::VectorXd fd = eps_fourier(u).cwiseAbs2();
    const double pos = (position_marginal(w) - dens).cwiseAbs().maxCoeff() / dens.maxCoeff();
    const double freq = (frequency_marginal(w) - fd).cwiseAbs().maxCoeff() / fd.maxCoeff();

    const Symbol a = Symbol::sample(c, [](const Eigen::Vector2d& x, const Eigen::Vector2d& xi) {
      return std::exp(0.5 * std::cos(2 * pi * (x[0] - 0.5)) - std::pow((xi[0] - 0.2) / 0.5, 2));
    });
    const double trip = (symbol_from_kernel(kernel_from_symbol(a), c).values - a.values).cwiseAbs().maxCoeff();

    const double e1 = commutator_residual(0.04), e2 = commutator_residual(0.02), e3 = commutator_residual(0.01);
    const double o1 = std::log2(e1 / e2), o2 = std::log2(e2 / e3);
    const bool ok = pos <= kMarginalTol && freq <= kMarginalTol && trip <= kRoundTripTol && o1 >= kCommutatorOrder &&
                    o2 >= kCommutatorOrder;
    report("C6 phase-space calculus", ok,
           fmt("marginals %.2g", std::max(pos, freq)) + fmt(", round trip %.2g", trip) +
               fmt(", commutator orders %.2f", o1) + fmt(" %.2f", o2));
  });

  criterion("C7 ray dynamics", [&] {
    const auto hom = Medium::homogeneous(2, 2.0, 0.3);
    const auto z0 = pp(0.1, 0.2, 3.0, 4.0);
    const double t = 5.0;
    const Eigen::Vector2d x = z0.x + t * std::sqrt(2.0) * z0.xi / z0.xi.norm();
    const double closed = (flow(hom, z0, t, 0.1).end().z.x - x).norm() / x.norm();

    const auto lens = Medium::gaussian_lens(2, 1.0, 0.2, 1.0, {0, 0}, 0.1);
    const auto ray = flow(lens, pp(-4.0, 0.3, 1.0, 0.05), 10.0, 0.01);
    double drift = 0;
    for (const auto& s : ray.samples)
      drift = std::max(drift, std::abs(hamiltonian(lens, s.z) - ray.hamiltonian) / ray.hamiltonian);

    const auto lin = Medium::linear(2, 1.0, 0.3, 0, 0.0);
    const auto zl = pp(0.0, 0.0, std::cos(2.0), std::sin(2.0));
    const auto end = [&](double dt) { return vec(flow(lin, zl, 3.0, dt).end()); };
    const Eigen::Vector4d ref = end(0.001);
    const auto rel = [&](double dt) { return (end(dt) - ref).norm() / ref.norm(); };
    const double r1 = rel(0.1), r2 = rel(0.05), r3 = rel(0.025);
    const double o1 = std::log2(r1 / r2), o2 = std::log2(r2 / r3);
    const bool ok = closed <= kClosedFormTol && drift <= kHamiltonianTol && o1 >= kRkOrder && o2 >= kRkOrder;
    report("C7 ray dynamics", ok,
           fmt("closed form %.2g", closed) + fmt(", H drift %.2g", drift) + fmt(", RK orders %.2f", o1) +
               fmt(" %.2f", o2));
  });

  criterion("C8 surface waves", [&] {
    const double n0 = 2.0, H = 1.5, xi = 3.0;
    const auto prof = DepthProfile::constant(n0, H, SurfaceBC::Dirichlet);
    std::vector<double> err;
    for (int M : {128, 256}) {
      const auto modes = sturm_liouville_modes(prof, xi, 4, M);
      double worst = 0;
      for (int m = 0; m < 4; ++m) {
        const double exact = n0 * (xi * xi + std::pow((m + 1) * pi / H, 2));
        worst = std::max(worst, std::abs(modes.values(m) - exact) / exact);
      }
      err.push_back(worst);
    }
    const double order = std::log2(err[0] / err[1]);

    const auto r = run_preset(scenario_preset("dispersion-inversion"), "dispersion", kDispersionSeed);
    disp_sums = checksums(r.manifest);
    const double clean = metric(r.manifest, "speed_error_clean"), noisy = metric(r.manifest, "speed_error_noisy");
    const bool ok = order >= kDirichletOrderLo && order <= kDirichletOrderHi && clean <= kSpeedClean &&
                    noisy <= kSpeedNoisy;
    report("C8 surface waves", ok,
           fmt("Dirichlet order %.3f", order) + fmt(", speed error clean %.2g", clean) +
               fmt(", noisy %.4f", noisy));
  });

  criterion("C9 scattering identity", [&] {
    const auto r = run_preset(scenario_preset("scattering-identity"), "scattering", kSeed);
    const double fr = metric(r.manifest, "free_space_max_rel_error"), dk = metric(r.manifest, "disk_max_rel_error");
    report("C9 scattering identity", fr <= kFreeSpaceTol && dk <= kDiskTol && r.seconds <= kScatteringRuntime,
           fmt("free space %.2g", fr) + fmt(", disk %.4f", dk) + fmt(", %.1f s", r.seconds));
  });

  criterion("C10 determinism", [&] {
    struct Rerun {
      const char* scenario;
      std::uint64_t seed;
      const std::map<std::string, std::string>* first;
    };
    const Rerun reruns[] = {{"white-noise-identity", kSeed, &white_sums},
                            {"localized-source-asymmetry", kSeed, &asym_sums},
                            {"dispersion-inversion", kDispersionSeed, &disp_sums}};
    bool ok = true;
    std::size_t compared = 0;
    for (const auto& rr : reruns) {
      const auto r = run_preset(scenario_preset(rr.scenario), std::string(rr.scenario) + "_again", rr.seed);
      const auto again = checksums(r.manifest);
      ok = ok && !rr.first->empty() && again == *rr.first;
      compared += again.size();
    }
    report("C10 determinism", ok, std::to_string(compared) + " files compared over 3 scenarios");
  });

  std::error_code ec;
  fs::remove_all(scratch, ec);
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
