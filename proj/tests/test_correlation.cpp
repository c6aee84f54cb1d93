#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "semicorr/correlation.hpp"
#include "semicorr/error.hpp"
#include "semicorr/wave_sim.hpp"
#include "test_util.hpp"

using namespace semicorr;
using std::numbers::pi;

namespace {

TraceSet synthetic(double dt, long rows, long cols, double phase) {
  TraceSet t{dt, 0.0, Eigen::MatrixXd(rows, cols)};
  for (long i = 0; i < rows; ++i)
    for (long c = 0; c < cols; ++c) t.values(i, c) = std::sin(0.37 * i + phase + c) + 0.3 * std::cos(1.1 * i * (c + 1));
  return t;
}

CorrelationRecord constant_record(double dtau, long j, std::function<double(double)> f) {
  CorrelationRecord r;
  r.dtau = dtau;
  r.values.resize(2 * j + 1);
  for (long l = -j; l <= j; ++l) r.values(l + j) = f(l * dtau);
  return r;
}

struct Scene {
  PhaseSpaceContext ctx{1, 64, 1.0, 0.05};
  Medium m = Medium::homogeneous(1, 1.0, 1.0);
  NoiseModel nm{ctx, PowerSpectrum::band_flat(1.0, ctx.grid, ctx.epsilon), 17, 1.0};
};

}  // namespace

TEST(EmpiricalCorrelation, ZeroTracesGiveZero) {
  TraceSet z{0.01, 0.0, Eigen::MatrixXd::Zero(2000, 2)};
  const auto r = empirical_correlation(z, z, 0.1, 1.0);
  EXPECT_EQ(r.values.size(), 21);
  EXPECT_EQ(r.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(EmpiricalCorrelation, MatchesDirectSum) {
  const double dt = 0.01;
  const TraceSet a = synthetic(dt, 3000, 3, 0.0), b = synthetic(dt, 3000, 3, 1.3);
  const double tau_max = 0.2, burn = 2.0, window = 5.0;
  const auto r = empirical_correlation(a, b, tau_max, burn, window);
  const long J = 20, s0 = 200 + J, w = 500;
  EXPECT_DOUBLE_EQ(r.window, 5.0);
  for (long l = -J; l <= J; ++l) {
    double direct = 0;
    for (long c = 0; c < 3; ++c)
      for (long i = s0; i < s0 + w; ++i) direct += a.values(i, c) * b.values(i - l, c);
    direct /= 3.0 * w;
    EXPECT_NEAR(r.at(l), direct, 1e-12) << l;
  }
}

TEST(EmpiricalCorrelation, QuadraticScaling) {
  const TraceSet a = synthetic(0.01, 3000, 2, 0.0), b = synthetic(0.01, 3000, 2, 0.4);
  TraceSet a3 = a, b3 = b;
  a3.values *= 3;
  b3.values *= 3;
  const auto r = empirical_correlation(a, b, 0.2, 2.0), r9 = empirical_correlation(a3, b3, 0.2, 2.0);
  EXPECT_LT((r9.values - 9 * r.values).norm(), 1e-12 * r9.values.norm());
}

TEST(EmpiricalCorrelation, Errors) {
  const TraceSet a = synthetic(0.01, 300, 1, 0.0);
  TraceSet b = a;
  EXPECT_THROW(empirical_correlation(a, a, 0.2, 2.0), InvalidArgument);  // 3 s < 2 + 10 * 0.2
  b.dt = 0.02;
  EXPECT_THROW(empirical_correlation(a, b, 0.01, 0.0), ContextMismatch);
  EXPECT_THROW(correlation_derivative(constant_record(0.1, 0, [](double) { return 1.0; })), InvalidArgument);
}

TEST(CorrelationDerivative, ConstantAndSine) {
  const auto c = correlation_derivative(constant_record(0.01, 50, [](double) { return 2.5; }));
  EXPECT_LT(c.values.cwiseAbs().maxCoeff(), 1e-10);
  const double w = 3.0;
  std::vector<double> err;
  for (double h : {0.02, 0.01}) {
    const long j = std::lround(1.0 / h);
    const auto d = correlation_derivative(constant_record(h, j, [w](double t) { return std::sin(w * t); }));
    double e = 0;
    for (long l = -j; l <= j; ++l) e = std::max(e, std::abs(d.at(l) - w * std::cos(w * l * h)));
    err.push_back(e);
  }
  EXPECT_LT(err[1], 2 * w * w * w * 0.01 * 0.01);
  EXPECT_NEAR(err[0] / err[1], 4.0, 0.5);
}

TEST(ExactCorrelation, ZeroNoise) {
  PhaseSpaceContext ctx(1, 64, 1.0, 0.05);
  NoiseModel nm(ctx, PowerSpectrum::zero(), 1, 1.0);
  const auto r = exact_correlation(Medium::homogeneous(1, 1.0, 1.0), nm, {0.25, 0}, {0.5, 0}, 0.3);
  EXPECT_EQ(r.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ExactCorrelation, WhiteNoiseEvenAndEq6) {
  Scene s;
  const double tau_max = 0.5;
  const auto r = exact_correlation(s.m, s.nm, {0.25, 0}, {0.5, 0}, tau_max);
  EXPECT_LT(r.tail_ratio, 0.01);
  EXPECT_TRUE(r.warnings.empty());
  // Even under the lag reflection.
  EXPECT_LT((r.values - r.values.reverse()).norm() / r.values.norm(), 0.02);
  // dC/dtau = -G / (2 a0) for tau > 0, G from the band-limited impulse.
  const auto d = correlation_derivative(r);
  const auto G = greens(s.m, s.ctx.grid, {0.5, 0}, {{0.25, 0}}, tau_max, r.dtau);
  double num = 0, den = 0;
  for (long l = 1; l <= r.half_width(); ++l) {
    if (r.tau(l) < 0.2 * tau_max) continue;
    const double ref = -G.samples(l, 0) / 2.0;
    num += std::pow(d.at(l) - ref, 2);
    den += ref * ref;
  }
  EXPECT_LT(std::sqrt(num / den), 0.02);
}

TEST(ExactCorrelation, TailWarning) {
  Scene s;
  ExactOptions o;
  o.horizon = 0.5;
  const auto r = exact_correlation(s.m, s.nm, {0.25, 0}, {0.5, 0}, 0.2, o);
  EXPECT_GT(r.tail_ratio, 0.01);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(SimulatedCorrelation, AgreesWithExactAndReflection) {
  Scene s;
  SimulationOptions o;
  o.tau_max = 1.0;
  o.window = 200 * o.tau_max;
  o.burn_in = 10;
  o.ensemble = 32;
  std::vector<TraceSet> tr;
  const auto emp = simulate_correlation(s.m, s.nm, {0.25, 0}, {0.5, 0}, o, &tr);
  const auto ex = exact_correlation(s.m, s.nm, {0.25, 0}, {0.5, 0}, o.tau_max);
  ASSERT_EQ(emp.values.size(), ex.values.size());
  const double err32 = relative_l2(emp, ex, 0, o.tau_max);
  EXPECT_LT(err32, 0.10);

  // C_AB(-tau) and C_BA(tau) differ only through window edges.
  const auto ba = empirical_correlation(tr[1], tr[0], o.tau_max, o.burn_in, o.window);
  EXPECT_LT(testutil::rel_l2(Eigen::VectorXd(emp.values.reverse()), Eigen::VectorXd(ba.values)), 0.02);

  // Ensemble averaging: groups of 8 scatter about twice as far as all 32.
  double err8 = 0;
  for (int gi = 0; gi < 4; ++gi) {
    CorrelationRecord g = emp;
    g.values = emp.realizations.middleCols(8 * gi, 8).rowwise().mean();
    err8 += std::pow(relative_l2(g, ex, 0, o.tau_max), 2) / 4;
  }
  const double ratio = err8 / (err32 * err32);
  RecordProperty("variance_ratio", std::to_string(ratio));
  EXPECT_GT(ratio, 2.0);
  EXPECT_LT(ratio, 8.0);

  // Autocorrelation peaks at zero lag.
  const auto aa = empirical_correlation(tr[0], tr[0], o.tau_max, o.burn_in, o.window);
  const double c0 = aa.at(0);
  const double floor3 = 3 * std::sqrt((aa.realizations.row(aa.half_width()).array() - c0).square().mean() / 32);
  for (long l = -aa.half_width(); l <= aa.half_width(); ++l) EXPECT_LE(std::abs(aa.at(l)), c0 + floor3);
}

TEST(SimulatedCorrelation, DeterministicAcrossBatchAndThreads) {
  Scene s;
  SimulationOptions o;
  o.tau_max = 0.1;
  o.window = 2;
  o.burn_in = 1;
  o.ensemble = 5;
  o.batch = 5;
  const auto a = simulate_traces(s.m, s.nm, {10, 20}, o);
  o.batch = 2;
  o.threads = 3;
  const auto b = simulate_traces(s.m, s.nm, {10, 20}, o);
  EXPECT_LT((a[0].values - b[0].values).cwiseAbs().maxCoeff(), 1e-13 * a[0].values.cwiseAbs().maxCoeff());
  EXPECT_LT((a[1].values - b[1].values).cwiseAbs().maxCoeff(), 1e-13 * a[1].values.cwiseAbs().maxCoeff());
  // Realization 3 alone reproduces column 3.
  o.first_realization = 3;
  o.ensemble = 1;
  const auto c = simulate_traces(s.m, s.nm, {10}, o);
  EXPECT_LT((c[0].values.col(0) - a[0].values.col(3)).cwiseAbs().maxCoeff(), 1e-13 * a[0].values.cwiseAbs().maxCoeff());
}

TEST(CorrelationIo, CsvAndMetadata) {
  auto r = constant_record(0.5, 2, [](double t) { return t * t; });
  r.provenance = Provenance::Exact;
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = (dir / "semicorr_corr.csv").string();
  write_csv(path, r);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "tau,value,provenance");
  std::getline(is, line);
  EXPECT_EQ(line, "-1,1,exact");
  const auto j = record_metadata(r);
  EXPECT_EQ(j["provenance"], "exact");
  EXPECT_EQ(j["lags"], 5);
  auto r2 = r;
  write_overlay_csv((dir / "semicorr_overlay.csv").string(), {"a", "b"}, {&r, &r2});
  r2.dtau = 0.25;
  EXPECT_THROW(write_overlay_csv((dir / "semicorr_overlay.csv").string(), {"a", "b"}, {&r, &r2}), ContextMismatch);
  EXPECT_EQ(r.reflected().at(-2), r.at(2));
}
