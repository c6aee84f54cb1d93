#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "semicorr/error.hpp"
#include "semicorr/surface_waves.hpp"

using namespace semicorr;
using std::numbers::pi;

namespace {

Eigen::VectorXd xi_grid(double lo, double hi, int count) { return Eigen::VectorXd::LinSpaced(count, lo, hi); }

DepthProfile two_layer() { return DepthProfile::layered({1.0, 4.0}, {0.5}, 1.0); }

}  // namespace

TEST(SturmLiouville, ConstantDirichletClosedFormSecondOrder) {
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
  EXPECT_LT(err[0], 1e-3);
  const double order = std::log2(err[0] / err[1]);
  EXPECT_GT(order, 1.9);
  EXPECT_LT(order, 2.1);
}

TEST(SturmLiouville, ConstantNeumannClosedForm) {
  const auto prof = DepthProfile::constant(1.0, 1.0, SurfaceBC::Neumann);
  const auto modes = sturm_liouville_modes(prof, 2.0, 3, 512);
  for (int m = 0; m < 3; ++m) {
    const double exact = 4.0 + std::pow((m + 0.5) * pi, 2);
    EXPECT_NEAR(modes.values(m), exact, 1e-4 * exact);
  }
  // Fundamental mode: cos((pi/2) z), positive, largest at the surface.
  EXPECT_GT(modes.functions(0, 0), 0.0);
  EXPECT_NEAR(modes.functions(0, 0), std::sqrt(2.0) * std::cos(0.5 * pi * modes.z(0)), 1e-4);
}

TEST(SturmLiouville, EigenfunctionsOrthonormal) {
  const auto modes = sturm_liouville_modes(two_layer(), 4.0, 8, 256);
  const double h = 1.0 / 256;
  const Eigen::MatrixXd gram = h * modes.functions.transpose() * modes.functions;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SturmLiouville, TwoLayerMatchesFourTimesFinerReference) {
  const auto coarse = sturm_liouville_modes(two_layer(), 3.0, 5, 256);
  const auto fine = sturm_liouville_modes(two_layer(), 3.0, 5, 1024);
  for (int m = 0; m < 5; ++m) EXPECT_NEAR(coarse.values(m), fine.values(m), 1e-3 * fine.values(m)) << m;
}

TEST(SturmLiouville, SecondOrderOnSmoothProfile) {
  DepthProfile prof;
  prof.depth = 1;
  prof.n = [](double x) { return 1 + 0.5 * x * x + 0.2 * std::sin(3 * x); };
  const double l1 = sturm_liouville_modes(prof, 2.0, 1, 64).values(0);
  const double l2 = sturm_liouville_modes(prof, 2.0, 1, 128).values(0);
  const double l3 = sturm_liouville_modes(prof, 2.0, 1, 256).values(0);
  const double order = std::log2((l1 - l2) / (l2 - l3));
  EXPECT_GE(order, 1.8);
  EXPECT_LE(order, 2.2);
}

TEST(SturmLiouville, VariationalBound) {
  const auto base = two_layer();
  DepthProfile up = base;
  up.n = [base](double z) { return base.n(z) + 0.05; };
  const auto a = sturm_liouville_modes(base, 2.0, 6, 256);
  const auto b = sturm_liouville_modes(up, 2.0, 6, 256);
  for (int m = 0; m < 6; ++m) EXPECT_GT(b.values(m), a.values(m)) << m;
}

TEST(SturmLiouville, Guards) {
  const auto prof = DepthProfile::constant(1.0, 1.0);
  EXPECT_THROW(sturm_liouville_modes(prof, 1.0, 2, 32), InvalidArgument);
  EXPECT_THROW(sturm_liouville_modes(prof, -1.0, 2, 64), InvalidArgument);
  EXPECT_THROW(DepthProfile::constant(-1.0, 1.0), InvalidArgument);
  EXPECT_THROW(DepthProfile::layered({1, 2}, {1.5}, 1.0), InvalidArgument);
  EXPECT_FALSE(sturm_liouville_modes(prof, 1.0, 20, 64).warnings.empty());
  EXPECT_TRUE(sturm_liouville_modes(prof, 1.0, 4, 64).warnings.empty());
}

TEST(Dispersion, ConstantProfileClosedFormAndSlope) {
  const double n0 = 1.5;
  const auto prof = DepthProfile::constant(n0, 1.0, SurfaceBC::Dirichlet);
  const Eigen::VectorXd xi = xi_grid(0.5, 6.0, 12);
  const auto c = dispersion_curve(prof, xi, 1, 512);
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    const double exact = n0 * (xi(i) * xi(i) + 4 * pi * pi);
    EXPECT_NEAR(c.values(i), exact, 2e-5 * exact);
    EXPECT_NEAR(c.slope(i), 2 * n0 * xi(i), 1e-6 * n0 * xi(i));  // exact for a quadratic
  }
  EXPECT_FALSE(c.near_degenerate);
}

TEST(Dispersion, MonotoneInXi) {
  const auto c = dispersion_curve(two_layer(), xi_grid(0.2, 15.0, 40), 0, 256);
  for (Eigen::Index i = 1; i < c.values.size(); ++i) EXPECT_GT(c.values(i), c.values(i - 1));
  EXPECT_GT(c.slope.minCoeff(), 0.0);
}

TEST(Dispersion, TwoLayerFundamentalMatchesRefinement) {
  const Eigen::VectorXd xi = xi_grid(0.5, 12.0, 16);
  const auto coarse = dispersion_curve(two_layer(), xi, 0, 256);
  const auto fine = dispersion_curve(two_layer(), xi, 0, 1024);
  EXPECT_LT(((coarse.values - fine.values).array() / fine.values.array()).abs().maxCoeff(), 1e-3);
}

TEST(Dispersion, Guards) {
  const auto prof = DepthProfile::constant(1.0, 1.0);
  Eigen::VectorXd bad(3);
  bad << 1.0, 0.5, 2.0;
  EXPECT_THROW(dispersion_curve(prof, bad), InvalidArgument);
  bad << 0.0, 0.5, 2.0;
  EXPECT_THROW(dispersion_curve(prof, bad), InvalidArgument);
}

TEST(Dispersion, EffectiveHamiltonianPerStation) {
  auto at = [](double x0) { return DepthProfile::constant(1.0 + 0.1 * x0, 1.0, SurfaceBC::Dirichlet); };
  const double v0 = effective_hamiltonian(at, 0.0, 2.0, 0, 512);
  const double v1 = effective_hamiltonian(at, 1.0, 2.0, 0, 512);
  EXPECT_NEAR(v1 / v0, 1.1, 1e-10);
  EXPECT_NEAR(v0, 4.0 + pi * pi, 1e-4);
}

TEST(Inversion, FixedPointAtTruth) {
  const auto fam = two_layer_family(1.0);
  const Eigen::Vector3d truth(1.0, 4.0, 0.5);
  const auto target = dispersion_curve(fam.make(truth), xi_grid(0.5, 12.0, 12), 0, 128);
  const auto rep = invert_profile(target, fam, truth);
  EXPECT_LT(rep.residual, 1e-12);
  EXPECT_EQ(rep.theta, Eigen::VectorXd(truth));
  EXPECT_TRUE(rep.converged);
}

TEST(Inversion, RecoversTwoLayerFromPerturbedStart) {
  const auto fam = two_layer_family(1.0);
  const Eigen::Vector3d truth(1.0, 4.0, 0.5);
  const auto target = dispersion_curve(fam.make(truth), xi_grid(0.5, 12.0, 12), 0, 128);
  const auto rep = invert_profile(target, fam, Eigen::Vector3d(1.3, 2.8, 0.65));
  EXPECT_NEAR(std::sqrt(rep.theta(0)), 1.0, 0.01);
  EXPECT_NEAR(std::sqrt(rep.theta(1)), 2.0, 0.02);
  EXPECT_NEAR(rep.theta(2), 0.5, 0.01);
  EXPECT_LT(rep.residual, 1e-6);
  for (std::size_t i = 1; i < rep.history.size(); ++i) EXPECT_LE(rep.history[i], rep.history[i - 1]);
  EXPECT_EQ(rep.covariance.rows(), 3);
  const auto j = rep.to_json(fam);
  EXPECT_EQ(j["family"], "two-layer");
  EXPECT_TRUE(j["theta"].contains("interface"));
}

TEST(Inversion, NoisyTarget) {
  const auto fam = two_layer_family(1.0);
  const Eigen::Vector3d truth(1.0, 4.0, 0.5);
  auto target = dispersion_curve(fam.make(truth), xi_grid(0.5, 12.0, 24), 0, 128);
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd(0.0, 0.01);
  Eigen::VectorXd clean = target.values;
  for (Eigen::Index i = 0; i < target.values.size(); ++i) target.values(i) *= 1 + nd(gen);
  const auto rep = invert_profile(target, fam, Eigen::Vector3d(1.3, 2.8, 0.65));
  EXPECT_NEAR(std::sqrt(rep.theta(0)), 1.0, 0.05);
  EXPECT_NEAR(std::sqrt(rep.theta(1)), 2.0, 0.10);
  EXPECT_NEAR(rep.theta(2), 0.5, 0.025);
  // Residual at the noise floor: no better than the truth's misfit, and close to it.
  const double floor = (target.values - clean).norm() / target.values.norm();
  EXPECT_LE(rep.residual, floor * 1.0000001);
  EXPECT_GT(rep.residual, 0.5 * floor);
}

TEST(Inversion, RelativeMisfitTightensNoisyRecovery) {
  const auto fam = two_layer_family(1.0);
  const Eigen::Vector3d truth(1.0, 4.0, 0.5);
  auto target = dispersion_curve(fam.make(truth), xi_grid(0.5, 12.0, 24), 0, 128);
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd(0.0, 0.01);
  for (Eigen::Index i = 0; i < target.values.size(); ++i) target.values(i) *= 1 + nd(gen);
  InversionOptions rel;
  rel.relative_misfit = true;
  const auto a = invert_profile(target, fam, Eigen::Vector3d(1.3, 2.8, 0.65));
  const auto b = invert_profile(target, fam, Eigen::Vector3d(1.3, 2.8, 0.65), rel);
  // Relative noise: per-point weights 1/lambda shrink the bottom-layer spread.
  EXPECT_LT(b.covariance(1, 1), 0.5 * a.covariance(1, 1));
  EXPECT_NEAR(std::sqrt(b.theta(1)), 2.0, 0.10);
  // Residual is the rms relative misfit, close to the 1% noise.
  EXPECT_GT(b.residual, 0.005);
  EXPECT_LT(b.residual, 0.015);
  auto bad = target;
  bad.values(0) = -1;
  EXPECT_THROW(invert_profile(bad, fam, Eigen::Vector3d(1.3, 2.8, 0.65), rel), InvalidArgument);
}

TEST(Inversion, Guards) {
  const auto fam = two_layer_family(1.0);
  const auto target = dispersion_curve(fam.make(Eigen::Vector3d(1, 4, 0.5)), xi_grid(0.5, 12.0, 8), 0, 64);
  EXPECT_THROW(invert_profile(target, fam, Eigen::Vector3d(1, 4, 0.5)), InvalidArgument);
  const auto ok = dispersion_curve(fam.make(Eigen::Vector3d(1, 4, 0.5)), xi_grid(0.5, 12.0, 10), 0, 64);
  EXPECT_THROW(invert_profile(ok, fam, Eigen::Vector2d(1, 4)), InvalidArgument);
}

TEST(SurfaceIo, CsvFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "semicorr_sw_io";
  std::filesystem::create_directories(dir);
  write_csv((dir / "p.csv").string(), two_layer(), 64);
  write_csv((dir / "c.csv").string(), dispersion_curve(two_layer(), xi_grid(1, 2, 3), 0, 64));
  std::ifstream p(dir / "p.csv"), c(dir / "c.csv");
  std::string line;
  std::getline(p, line);
  EXPECT_EQ(line, "z,n");
  std::getline(c, line);
  EXPECT_EQ(line, "xi,lambda,slope");
  int rows = 0;
  while (std::getline(c, line)) ++rows;
  EXPECT_EQ(rows, 3);
  std::filesystem::remove_all(dir);
}
