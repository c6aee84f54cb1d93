#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "semicorr/correlation.hpp"
#include "semicorr/error.hpp"
#include "semicorr/semiclassical.hpp"
#include "semicorr/wave_sim.hpp"
#include "test_util.hpp"

using namespace semicorr;
using std::numbers::pi;

namespace {

// Composite Simpson along the straight backward ray of a homogeneous medium,
// run to twice the horizon.
double straight_ray_oracle(const PowerSpectrum& p, double n0, double a0, const PhasePoint& z, double horizon,
                           double ds) {
  const long steps = 2 * std::lround(horizon / ds);
  const Eigen::Vector2d u = z.xi / z.xi.norm();
  auto f = [&](double s) { return std::exp(-a0 * s) * p(z.x - std::sqrt(n0) * s * u, z.xi); };
  double acc = f(0) + f(steps * ds);
  for (long i = 1; i < steps; ++i) acc += (i % 2 ? 4 : 2) * f(i * ds);
  return acc * ds / 3;
}

std::vector<double> lags(double lo, double hi, int count) {
  std::vector<double> t(count);
  for (int i = 0; i < count; ++i) t[i] = lo + (hi - lo) * i / (count - 1);
  return t;
}

}  // namespace

TEST(PiBar, WhiteNoiseClosedForm) {
  const PhaseSpaceContext ctx(1, 32, 1.0, 0.05);
  const double a0 = 2.0, n0 = 1.5;
  const Medium m = Medium::homogeneous(1, n0, a0);
  const NoiseModel nm(ctx, PowerSpectrum::white(1.0), 1, 1.0);
  const PredictedSymbol pb = pi_bar(m, nm);
  EXPECT_NEAR(pb.horizon, 8.0, 1e-12);
  for (std::size_t s = 0; s < ctx.size(); ++s) {
    const double r = ctx.xi_vector(s).norm();
    for (std::size_t j = 0; j < ctx.size(); ++j) {
      const double v = pb.pi_bar.values(j, s).real();
      if (r == 0) {
        EXPECT_EQ(v, 0.0);
      } else {
        const double l0 = std::sqrt(n0) * r;
        EXPECT_NEAR(v, ctx.epsilon * ctx.epsilon / (4 * l0 * l0 * a0), 1e-10 * v);
      }
    }
  }
  EXPECT_EQ(pb.masked, ctx.size());
  EXPECT_TRUE(pb.warnings.empty());
}

TEST(PiBar, WhiteNoiseClosedForm2D) {
  const PhaseSpaceContext ctx(2, 8, 1.0, 0.2);
  const Medium m = Medium::homogeneous(2, 1.0, 1.0);
  const NoiseModel nm(ctx, PowerSpectrum::white(1.0), 1, 1.0);
  const PredictedSymbol pb = pi_bar(m, nm);
  for (std::size_t s = 1; s < ctx.size(); ++s) {
    const double r = ctx.xi_vector(s).norm();
    EXPECT_NEAR(pb.pi_bar.values(5, s).real(), ctx.epsilon * ctx.epsilon / (4 * r * r), 1e-10);
  }
}

TEST(PiBar, ZeroSpectrumGivesZero) {
  const PhaseSpaceContext ctx(1, 32, 1.0, 0.05);
  const Medium m = Medium::homogeneous(1, 1.0, 1.0);
  const NoiseModel nm(ctx, PowerSpectrum::zero(), 1, 1.0);
  EXPECT_EQ(pi_bar(m, nm).pi_bar.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PiBar, UnreachedSupportGivesZero) {
  // Sources on the left half; a right-moving node on the right half whose
  // backward ray (toward smaller x) stays right within the horizon.
  const PhaseSpaceContext ctx(1, 64, 4.0, 0.1);
  const Medium m = Medium::homogeneous(1, 1.0, 8.0);  // T_att = 0.25, horizon 2
  const NoiseModel nm(ctx, PowerSpectrum::half_domain(1.0, 0.0, 1.0, 0.01, 1.0, 0.5, 4.0), 1, 1.0);
  const PredictedSymbol pb = pi_bar(m, nm);
  const double eps = ctx.epsilon;
  for (std::size_t s = 0; s < ctx.size(); ++s) {
    const double xi = ctx.xi_vector(s)[0];
    if (xi <= 0) continue;
    // x = 3.5: backward reach [1.5, 3.5]
    EXPECT_EQ(pb.pi_bar.values(56, s).real(), 0.0) << xi / eps;
  }
  EXPECT_GT(pb.pi_bar.values.real().maxCoeff(), 0.0);
  EXPECT_GE(pb.pi_bar.values.real().minCoeff(), 0.0);
}

TEST(PiBar, GaussianPatchMatchesDenseQuadrature) {
  const PhaseSpaceContext ctx(1, 32, 1.0, 0.05);
  const double a0 = 1.5, n0 = 1.3;
  const Medium m = Medium::homogeneous(1, n0, a0, 1.0);
  const PowerSpectrum p = PowerSpectrum::gaussian(2.0, Eigen::Vector2d(0.4, 0), 0.15, 0.6, 1.0);
  const NoiseModel nm(ctx, p, 1, 1.0);
  const PredictedSymbol pb = pi_bar(m, nm);
  const double ds = pb.ray_dt / 10;
  double worst = 0;
  for (std::size_t j : {0, 7, 13, 22, 31})
    for (std::size_t s : {1, 3, 9, 15, 17, 25, 31}) {
      const PhasePoint z{ctx.grid.position(j), ctx.xi_vector(s)};
      const double l0 = std::sqrt(n0) * z.xi.norm();
      const double ref =
          ctx.epsilon * ctx.epsilon / (4 * l0 * l0) * straight_ray_oracle(p, n0, a0, z, pb.horizon, ds);
      worst = std::max(worst, std::abs(pb.pi_bar.values(j, s).real() - ref) / ref);
    }
  EXPECT_LT(worst, 1e-6);
}

TEST(PiBar, HorizonGuards) {
  const PhaseSpaceContext ctx(1, 16, 1.0, 0.1);
  const NoiseModel nm(ctx, PowerSpectrum::white(1.0), 1, 1.0);
  PiBarOptions opt;
  opt.horizon = 4.0;  // 8 T_att = 16
  EXPECT_THROW(pi_bar(Medium::homogeneous(1, 1.0, 1.0), nm, opt), InvalidArgument);
  EXPECT_THROW(pi_bar(Medium::homogeneous(1, 1.0, 0.0), nm), InvalidArgument);
  opt.horizon = 3.0;
  const PredictedSymbol pb = pi_bar(Medium::homogeneous(1, 1.0, 0.0), nm, opt);
  EXPECT_FALSE(pb.warnings.empty());  // no exponential tail without attenuation
  EXPECT_NEAR(pb.pi_bar.values(0, 1).real(), ctx.epsilon * ctx.epsilon / (4 * ctx.dxi() * ctx.dxi()) * 3.0, 1e-9);
}

TEST(PiBar, MaskWarning) {
  const PhaseSpaceContext ctx(1, 16, 1.0, 0.1);
  const NoiseModel nm(ctx, PowerSpectrum::white(1.0), 1, 1.0);
  PiBarOptions opt;
  opt.l0_floor = 3 * ctx.dxi();  // masks |m| < 3: 5 of 16 columns
  const PredictedSymbol pb = pi_bar(Medium::homogeneous(1, 1.0, 1.0), nm, opt);
  EXPECT_EQ(pb.masked, 5u * 16u);
  ASSERT_EQ(pb.warnings.size(), 1u);
  EXPECT_NE(pb.warnings[0].find("masked"), std::string::npos);
}

TEST(PiBar, MonotoneInAttenuation) {
  const PhaseSpaceContext ctx(1, 32, 1.0, 0.05);
  const NoiseModel nm(ctx, PowerSpectrum::x_bump_xi_annulus(1.0, Eigen::Vector2d(0.3, 0), 0.2, 0.8, 0.5, 1.0), 1,
                      1.0);
  PiBarOptions opt;
  opt.horizon = 16;
  const Eigen::MatrixXd lo = pi_bar(Medium::homogeneous(1, 1.0, 1.0, 1.0), nm, opt).pi_bar.values.real();
  const Eigen::MatrixXd hi = pi_bar(Medium::homogeneous(1, 1.0, 2.0, 1.0), nm, opt).pi_bar.values.real();
  EXPECT_GE(lo.minCoeff(), 0.0);
  EXPECT_GE((lo - hi).minCoeff(), 0.0);
  EXPECT_GT((lo - hi).maxCoeff(), 0.0);
}

TEST(PiBar, HeterogeneousMediumIsNonnegativeAndFinite) {
  const PhaseSpaceContext ctx(1, 32, 1.0, 0.05);
  Eigen::VectorXd n(32);
  for (int j = 0; j < 32; ++j) n(j) = 1 + 0.2 * std::cos(2 * pi * j / 32.0);
  const Medium m = Medium::from_grid(ctx.grid, n, Eigen::VectorXd::Constant(32, 2.0));
  const NoiseModel nm(ctx, PowerSpectrum::x_bump_xi_annulus(1.0, Eigen::Vector2d(0.3, 0), 0.2, 0.8, 0.5, 1.0), 1,
                      1.0);
  const Eigen::MatrixXd v = pi_bar(m, nm).pi_bar.values.real();
  EXPECT_TRUE(v.allFinite());
  EXPECT_GE(v.minCoeff(), 0.0);
  EXPECT_GT(v.maxCoeff(), 0.0);
}

// ---------------------------------------------------------------------------

TEST(Predict, ZeroSpectrumGivesZero) {
  const PhaseSpaceContext ctx(1, 32, 1.0, 0.05);
  const Medium m = Medium::homogeneous(1, 1.0, 1.0);
  const NoiseModel nm(ctx, PowerSpectrum::zero(), 1, 1.0);
  const auto rec = predict_correlation(m, pi_bar(m, nm), {0.25, 0}, {0.5, 0}, 0.5, 0.05);
  EXPECT_EQ(rec.provenance, Provenance::Semiclassical);
  EXPECT_EQ(rec.values.size(), 21);
  EXPECT_EQ(rec.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Predict, WhiteNoiseDerivativeIsMinusHalfGreenOverA) {
  // d/dtau C = -G / (2 a0), with G the Green's function without its zero and
  // Nyquist modes (masked in pi_bar).
  const int N = 64;
  const PhaseSpaceContext ctx(1, N, 1.0, 0.05);
  const double a0 = 0.1, n0 = 1.0;
  const Medium m = Medium::homogeneous(1, n0, a0);
  const NoiseModel nm(ctx, PowerSpectrum::white(1.0), 1, 1.0);
  const PredictedSymbol pb = pi_bar(m, nm);
  const Eigen::Vector2d A(0.25, 0), B(0.5, 0);
  const std::vector<double> taus = lags(0.05, 0.8, 31);
  PredictOptions opt;
  opt.derivative = true;
  const Eigen::VectorXd d = predict_correlation_at(m, pb, A, B, taus, opt);
  Eigen::VectorXd ref(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) {
    double g = 0;
    for (int k = 1; k < N / 2; ++k) {
      const double w = 2 * pi * k * std::sqrt(n0);
      g += 2 * std::exp(-a0 * taus[i] / 2) * std::sin(taus[i] * w) / w * std::cos(2 * pi * k * (A[0] - B[0]));
    }
    ref(i) = -g / (2 * a0);
  }
  EXPECT_LT(testutil::rel_l2(d, ref), 0.05);
}

TEST(Predict, DerivativeFormMatchesFiniteDifference) {
  const PhaseSpaceContext ctx(1, 64, 1.0, 0.04);
  const Medium m = Medium::homogeneous(1, 1.0, 2.0);
  const NoiseModel nm(ctx, PowerSpectrum::half_domain(1.0, 0.05, 0.45, 0.03, 1.0, 0.5, 1.0), 1, 1.0);
  const PredictedSymbol pb = pi_bar(m, nm);
  const auto c = predict_correlation(m, pb, {0.55, 0}, {0.7, 0}, 0.6, 0.002);
  PredictOptions opt;
  opt.derivative = true;
  const auto d = predict_correlation(m, pb, {0.55, 0}, {0.7, 0}, 0.6, 0.002, opt);
  const auto fd = correlation_derivative(c);
  EXPECT_LT(relative_l2(fd, d, 0.01, 0.6), 0.02);
}

TEST(Predict, WhiteNoiseRecordIsEven) {
  const PhaseSpaceContext ctx(1, 64, 1.0, 0.05);
  const Medium m = Medium::homogeneous(1, 1.0, 1.0);
  const NoiseModel nm(ctx, PowerSpectrum::band_flat(1.0, ctx.grid, ctx.epsilon), 1, 1.0);
  const auto rec = predict_correlation(m, pi_bar(m, nm), {0.3, 0}, {0.55, 0}, 1.0, 0.01);
  EXPECT_LT(relative_l2(rec.reflected(), rec, 0.0, 1.0), 0.02);
}

TEST(Predict, VariableAttenuationPathAgreesWithConstant) {
  // The general (complex eigen) path on a constant field written as a grid
  // sample must reproduce the constant-a fast path.
  const PhaseSpaceContext ctx(1, 32, 1.0, 0.05);
  const Medium mc = Medium::homogeneous(1, 1.0, 1.5, 1.0);
  Eigen::VectorXd a = Eigen::VectorXd::Constant(32, 1.5);
  a(3) = 1.5 + 1e-9;  // defeats constant detection without changing the physics
  const Medium mv = Medium::from_grid(ctx.grid, Eigen::VectorXd::Ones(32), a);
  const NoiseModel nm(ctx, PowerSpectrum::band_flat(1.0, ctx.grid, ctx.epsilon), 1, 1.0);
  const PredictedSymbol pb = pi_bar(mc, nm);
  const std::vector<double> taus = lags(0.02, 0.5, 13);
  const Eigen::VectorXd x = predict_correlation_at(mc, pb, {0.25, 0}, {0.5, 0}, taus);
  const Eigen::VectorXd y = predict_correlation_at(mv, pb, {0.25, 0}, {0.5, 0}, taus);
  EXPECT_LT(testutil::rel_l2(y, x), 1e-6);
}

TEST(Predict, OffGridReceiversInterpolate) {
  const PhaseSpaceContext ctx(1, 64, 1.0, 0.05);
  const Medium m = Medium::homogeneous(1, 1.0, 1.0);
  const NoiseModel nm(ctx, PowerSpectrum::band_flat(1.0, ctx.grid, ctx.epsilon), 1, 1.0);
  const PredictedSymbol pb = pi_bar(m, nm);
  // Homogeneous: the kernel depends on A - B only.
  const std::vector<double> taus = lags(0.05, 0.5, 10);
  const Eigen::VectorXd on = predict_correlation_at(m, pb, {0.25, 0}, {0.5, 0}, taus);
  const Eigen::VectorXd off = predict_correlation_at(m, pb, {0.2571, 0}, {0.5071, 0}, taus);
  EXPECT_LT(testutil::rel_l2(off, on), 1e-8);
}

TEST(Predict, Guards) {
  const PhaseSpaceContext ctx(1, 16, 1.0, 0.1);
  const Medium m = Medium::homogeneous(1, 1.0, 1.0);
  const NoiseModel nm(ctx, PowerSpectrum::white(1.0), 1, 1.0);
  const PredictedSymbol pb = pi_bar(m, nm);
  EXPECT_THROW(predict_correlation_at(m, pb, {0.1, 0}, {0.2, 0}, {0.1, 0.0}), InvalidArgument);
  EXPECT_THROW(predict_correlation_at(m, pb, {0.1, 0}, {0.2, 0}, {-0.1}), InvalidArgument);
  PredictedSymbol fake;
  fake.pi_bar = Symbol(PhaseSpaceContext(1, 1024, 1.0, 0.01));
  EXPECT_THROW(predict_correlation_at(m, fake, {0.1, 0}, {0.2, 0}, {0.1}), SizeLimit);
}

TEST(Predict, EpsilonRefinementApproachesExact) {
  // Half-domain sources, homogeneous medium: the predictor error against the
  // exact stationary correlation on the arrival window drops with epsilon.
  const Medium m = Medium::homogeneous(1, 1.0, 5.0, 1.0);
  const Eigen::Vector2d A(0.75, 0), B(0.6, 0);
  std::vector<double> err;
  for (double eps : {0.02, 0.01}) {
    const PhaseSpaceContext ctx(1, 512, 1.0, eps);
    const NoiseModel nm(ctx, PowerSpectrum::half_domain(1.0, 0.05, 0.45, 0.02, 1.0, 0.5, 1.0), 3, 1.0);
    const auto exact = exact_correlation(m, nm, A, B, 0.3);
    const auto pred = predict_correlation(m, pi_bar(m, nm), A, B, 0.3, exact.dtau);
    err.push_back(relative_l2(pred, exact, 0.05, 0.25));
  }
  EXPECT_LT(err[1], err[0]);
  EXPECT_LT(err[1], 0.15);
}

// ---------------------------------------------------------------------------

TEST(MGamma, WhiteNoise) {
  const PhaseSpaceContext ctx(1, 32, 1.0, 0.05);
  const double a0 = 0.7;
  const Medium m = Medium::homogeneous(1, 1.0, a0);
  const NoiseModel nm(ctx, PowerSpectrum::white(1.0), 1, 1.0);
  const auto rays = shoot(m, {0.3, 0}, {0.6, 0}, 0.3);
  ASSERT_EQ(rays.size(), 1u);
  const RayContribution rc = m_gamma(rays[0], nm, m);
  EXPECT_NEAR(rc.m_gamma, -1 / (2 * a0), 1e-8);
  EXPECT_NEAR(rc.horizon, 8 * 2 / a0, 1e-12);
  EXPECT_NEAR(-rc.ray.end().t, rc.horizon, 1e-12);
}

TEST(MGamma, VanishesWithoutExposure) {
  const PhaseSpaceContext ctx(1, 32, 4.0, 0.2);
  const Medium m = Medium::homogeneous(1, 1.0, 8.0);
  // Patch ahead of the ray only.
  const NoiseModel nm(ctx, PowerSpectrum::half_domain(1.0, 1.6, 2.4, 0.01, 1.0, 0.5, 4.0), 1, 1.0);
  const auto rays = shoot(m, {1.0, 0}, {1.5, 0}, 0.5);
  ASSERT_EQ(rays.size(), 1u);
  EXPECT_EQ(m_gamma(rays[0], nm, m, {}, 1.0).m_gamma, 0.0);
}

TEST(MGamma, OneSidedPatchOrderingAndOracle) {
  const double L = 4, a0 = 0.5, n0 = 1.0;
  const PhaseSpaceContext ctx(1, 64, L, 0.1);
  const Medium m = Medium::homogeneous(1, n0, a0, L);
  const PowerSpectrum p = PowerSpectrum::half_domain(1.0, 0.8, 1.6, 0.05, 1.0, 0.5, L);
  const NoiseModel nm(ctx, p, 1, 1.0);
  const Eigen::Vector2d A(2.5, 0), B(2.0, 0);
  ExposureOptions ex;
  ex.dt = 0.01;
  const auto from_b = shoot(m, B, A, 0.5), from_a = shoot(m, A, B, 0.5);
  ASSERT_EQ(from_b.size(), 1u);
  ASSERT_EQ(from_a.size(), 1u);
  const double mb = m_gamma(from_b[0], nm, m, ex, 1.0).m_gamma;
  const double ma = m_gamma(from_a[0], nm, m, ex, 1.0).m_gamma;
  EXPECT_LE(mb, 0.0);
  EXPECT_LE(ma, 0.0);
  EXPECT_GT(std::abs(mb), std::abs(ma));
  const double horizon = 8 * 2 / a0;
  const PhasePoint zb{B, {1.0, 0}}, za{A, {-1.0, 0}};
  EXPECT_NEAR(mb, -0.5 * straight_ray_oracle(p, n0, a0, zb, horizon, 1e-3), 1e-6 * std::abs(mb));
  EXPECT_NEAR(ma, -0.5 * straight_ray_oracle(p, n0, a0, za, horizon, 1e-3), 1e-6 * std::abs(ma));
}

TEST(MGamma, MonotoneInAttenuation) {
  const PhaseSpaceContext ctx(1, 32, 1.0, 0.05);
  const NoiseModel nm(ctx, PowerSpectrum::x_bump_xi_annulus(1.0, Eigen::Vector2d(0.3, 0), 0.2, 1.0, 0.5, 1.0), 1,
                      1.0);
  ExposureOptions ex;
  ex.horizon = 40;
  double prev = 0;
  for (double a0 : {0.5, 1.0, 2.0, 4.0}) {
    const Medium m = Medium::homogeneous(1, 1.0, a0, 1.0);
    const auto rays = shoot(m, {0.5, 0}, {0.7, 0}, 0.2);
    ASSERT_EQ(rays.size(), 1u);
    const double v = std::abs(m_gamma(rays[0], nm, m, ex, 1.0).m_gamma);
    if (a0 > 0.5) EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(MGamma, ZeroCovectorIsAnError) {
  const PhaseSpaceContext ctx(1, 32, 1.0, 0.05);
  const Medium m = Medium::homogeneous(1, 1.0, 1.0);
  const NoiseModel nm(ctx, PowerSpectrum::white(1.0), 1, 1.0);
  Ray r;
  r.samples.push_back(RaySample{0.0, PhasePoint{{0.2, 0}, {0, 0}}, 0.0});
  EXPECT_THROW(m_gamma(r, nm, m), NumericalError);
}

TEST(Asymmetry, WhiteNoiseAndSymmetricPatch) {
  const PhaseSpaceContext ctx(1, 64, 4.0, 0.1);
  const Medium m = Medium::homogeneous(1, 1.0, 0.5, 4.0);
  const NoiseModel white(ctx, PowerSpectrum::white(1.0), 1, 1.0);
  const auto kw = asymmetry_factor({2.5, 0}, {2.0, 0}, 0.5, m, white);
  EXPECT_NEAR(kw.k, 1.0, 1e-10);
  // Patch centred on the periodic antipode of the A-B midpoint.
  const NoiseModel sym(ctx, PowerSpectrum::x_bump_xi_annulus(1.0, Eigen::Vector2d(0.25, 0), 0.5, 1.0, 0.5, 4.0), 1,
                       1.0);
  const auto ks = asymmetry_factor({2.5, 0}, {2.0, 0}, 0.5, m, sym);
  EXPECT_NEAR(ks.k, 1.0, 1e-6);
  EXPECT_FALSE(ks.one_sided);
}

TEST(Asymmetry, PatchBehindB) {
  const PhaseSpaceContext ctx(1, 64, 4.0, 0.1);
  const Medium m = Medium::homogeneous(1, 1.0, 0.5, 4.0);
  const NoiseModel nm(ctx, PowerSpectrum::half_domain(1.0, 0.8, 1.6, 0.05, 1.0, 0.5, 4.0), 1, 1.0);
  const auto k = asymmetry_factor({2.5, 0}, {2.0, 0}, 0.5, m, nm);
  // Sources reach A from behind B after ~1.9 more units of travel.
  EXPECT_GT(k.k, 0.3);
  EXPECT_LT(k.k, 0.5);
  EXPECT_LT(k.m_ba, k.m_ab);
}

TEST(Asymmetry, OneSidedAndRayCountGuards) {
  const PhaseSpaceContext ctx(1, 64, 4.0, 0.1);
  const Medium m = Medium::homogeneous(1, 1.0, 8.0, 4.0);
  // Patch behind A only, out of reach of the ray from B.
  const NoiseModel nm(ctx, PowerSpectrum::half_domain(1.0, 2.6, 2.9, 0.01, 1.0, 0.5, 4.0), 1, 1.0);
  const auto k = asymmetry_factor({2.5, 0}, {2.0, 0}, 0.5, m, nm);
  EXPECT_TRUE(k.one_sided);
  EXPECT_TRUE(std::isnan(k.k));
  // Antipodal receivers: two connecting rays each way.
  EXPECT_THROW(asymmetry_factor({2.0, 0}, {0.0, 0}, 2.0, m, nm), InvalidArgument);
}

TEST(Asymmetry, EmpiricalRatio) {
  CorrelationRecord r;
  r.dtau = 0.1;
  r.values.resize(21);
  for (long l = -10; l <= 10; ++l) r.values(l + 10) = (l < 0 ? 0.4 : 1.0) * std::exp(-0.1 * std::abs(l));
  EXPECT_NEAR(empirical_asymmetry(r, 0.2, 0.8), 0.4, 1e-12);
  r.values.setZero();
  EXPECT_THROW(empirical_asymmetry(r, 0.2, 0.8), InvalidArgument);
}
