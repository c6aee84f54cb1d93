#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "semicorr/error.hpp"
#include "semicorr/scattering.hpp"

using namespace semicorr;
using std::numbers::pi;

namespace {

HelmholtzSetup free_setup(int cells = 96) { return HelmholtzSetup::free_space(1.0, 4.0, 6.0, cells, 1.6); }

HelmholtzSetup disk_setup(int cells = 192, double layer = 1.6) {
  return HelmholtzSetup::disk(1.0, 0.7, 0.5, Eigen::Vector2d::Zero(), 4.0, 6.0, cells, layer);
}

const HelmholtzSolver& disk_solver() {
  static const HelmholtzSolver s(disk_setup());
  return s;
}

}  // namespace

TEST(FreeSpace, AngularAverageIsBesselJ0) {
  const auto s = free_setup();
  const Eigen::Vector2d x(0.3, -0.2), y(-0.5, 0.6);
  const auto c = angular_average_correlation(s, x, y, 64);
  const double ref = 2 * pi * std::cyl_bessel_j(0, s.k() * (x - y).norm());
  EXPECT_NEAR(c.value.real(), ref, 1e-8);
  EXPECT_NEAR(c.value.imag(), 0.0, 1e-8);
}

TEST(FreeSpace, SamePointGivesTwoPi) {
  const auto c = angular_average_correlation(free_setup(), {0.1, 0.2}, {0.1, 0.2}, 64);
  EXPECT_NEAR(c.value.real(), 2 * pi, 1e-12);
  EXPECT_NEAR(c.value.imag(), 0.0, 1e-12);
}

TEST(FreeSpace, IdentityClosesWithClosedFormGreen) {
  const auto s = free_setup();
  for (const auto& [x, y] : std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>>{
           {{0.3, -0.2}, {-0.5, 0.6}}, {{0.0, 0.0}, {1.0, 0.0}}, {{-0.7, -0.7}, {0.4, 0.9}}}) {
    const auto rep = verify_im_g_identity(s, x, y, 128);
    EXPECT_LT(rep.relative_error, 1e-6);
    EXPECT_NEAR(rep.green.imag(), -std::cyl_bessel_j(0, s.k() * (x - y).norm()) / 4, 1e-14);
  }
}

TEST(FreeSpace, NoScatteredField) {
  const auto sol = solve_scattering(free_setup(), {1.0, 0.0});
  EXPECT_EQ(sol.scattered.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(sol.total.cwiseAbs().maxCoeff(), 1.0, 1e-12);
}

TEST(FreeSpace, PointSourceSolveMatchesOutgoingGreen) {
  // Layer check: a discrete point source on the full operator reproduces the
  // outgoing H0 away from the source (no standing-wave reflection).
  const auto s = free_setup(192);
  const HelmholtzSolver solver(s);
  const int mid = solver.nodes_per_axis() / 2;
  const Eigen::Vector2d y = solver.node(mid, mid);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(solver.nodes_per_axis()) *
                                                 solver.nodes_per_axis());
  rhs(solver.index(mid, mid)) = 1 / (s.h() * s.h());
  const Eigen::VectorXcd u = solver.solve(rhs);
  EXPECT_LT(solver.last_residual(), 1e-10);
  double worst = 0;
  for (int d : {16, 24, 32, 40}) {
    const cplxd g = free_space_green(s, solver.node(mid + d, mid), y);
    worst = std::max(worst, std::abs(u(solver.index(mid + d, mid)) - g) / std::abs(g));
  }
  EXPECT_LT(worst, 0.03);
}

TEST(Disk, FarFieldMatchesPartialWaves) {
  const auto sol = solve_scattering(disk_solver(), {1.0, 0.0}, 64);
  const Eigen::VectorXcd ref = disk_far_field(1.0, 0.7, 0.5, 4.0, sol.far_angles);
  const Eigen::VectorXd a = sol.far_field.cwiseAbs(), b = ref.cwiseAbs();
  EXPECT_LT((a - b).norm() / b.norm(), 0.03);
  EXPECT_GT(sol.scattered.cwiseAbs().maxCoeff(), 0.01);
}

TEST(Disk, PartialWavesVanishWithoutContrast) {
  const Eigen::VectorXd ang = Eigen::VectorXd::LinSpaced(8, 0, 7);
  EXPECT_LT(disk_far_field(1.0, 1.0, 0.5, 4.0, ang).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Disk, FarFieldReciprocity) {
  // e_inf(xhat, khat) = e_inf(-khat, -xhat); angles on the 64-point grid.
  const HelmholtzSolver& solver = disk_solver();
  const double tk = 2 * pi * 5 / 64, tx = 2 * pi * 23 / 64;
  const auto s1 = solve_scattering(solver, {std::cos(tk), std::sin(tk)}, 64);
  const auto s2 = solve_scattering(solver, {std::cos(tx + pi), std::sin(tx + pi)}, 64);
  const cplxd a = s1.far_field(23), b = s2.far_field((5 + 32) % 64);
  EXPECT_LT(std::abs(a - b) / std::abs(a), 1e-8);
}

TEST(Disk, AngularCorrelationProperties) {
  const HelmholtzSolver& solver = disk_solver();
  const Eigen::Vector2d x(0.75, 0.0), y(-0.5, 0.75);
  const auto cxy = angular_average_correlation(solver, x, y, 256);
  const auto cyx = angular_average_correlation(solver, y, x, 256);
  EXPECT_LT(std::abs(cyx.value - std::conj(cxy.value)), 1e-12 * std::abs(cxy.value));
  const auto cxx = angular_average_correlation(solver, x, x, 128);
  EXPECT_GT(cxx.value.real(), 0.0);
  EXPECT_EQ(cxx.value.imag(), 0.0);
  // Halving 256 -> 128 directions.
  EXPECT_LT(cxy.discrepancy, 5e-3);
  EXPECT_TRUE(cxy.warnings.empty());
}

TEST(Disk, ImGIdentityAtThreePairs) {
  const HelmholtzSolver& solver = disk_solver();
  for (const auto& [x, y] : std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>>{
           {{0.75, 0.0}, {-0.75, 0.0}}, {{0.0, 0.8}, {0.6, -0.6}}, {{0.2, 0.1}, {-0.9, 0.5}}}) {
    const auto rep = verify_im_g_identity(solver, x, y, 128);
    EXPECT_LT(rep.relative_error, 0.03) << x.transpose() << " / " << y.transpose() << ": " << rep.lhs << " vs "
                                        << rep.rhs;
    EXPECT_NE(rep.to_json().dump().find("relative_error"), std::string::npos);
  }
}

TEST(Disk, IdentityErrorDropsUnderRefinement) {
  const Eigen::Vector2d x(0.75, 0.0), y(-0.75, 0.25);
  const double coarse = verify_im_g_identity(disk_setup(96, 1.6), x, y, 128).relative_error;
  const double fine = verify_im_g_identity(disk_solver(), x, y, 128).relative_error;
  EXPECT_LT(fine, coarse);
}

TEST(Scattering, Guards) {
  const auto s = free_setup();
  EXPECT_THROW(verify_im_g_identity(s, {0.1, 0.1}, {0.1, 0.1}), InvalidArgument);
  EXPECT_THROW(angular_average_correlation(s, {0.1, 0.1}, {2.0, 0.0}), InvalidArgument);  // inside the layer
  EXPECT_THROW(angular_average_correlation(s, {0.1, 0.1}, {0.2, 0.0}, 32), InvalidArgument);
  EXPECT_THROW(HelmholtzSetup::free_space(1.0, 40.0, 6.0, 96, 1.6), InvalidArgument);  // points per wavelength
  EXPECT_THROW(HelmholtzSetup::free_space(1.0, 4.0, 6.0, 96, 0.5), InvalidArgument);   // thin layer
  EXPECT_THROW(HelmholtzSetup::disk(1.0, 0.7, 1.3, Eigen::Vector2d::Zero(), 4.0, 6.0, 96, 1.6), InvalidArgument);
  const auto d = disk_setup(96);
  EXPECT_THROW(verify_im_g_identity(d, {0.5, 0.0}, {-0.75, 0.0}), InvalidArgument);  // on the disk edge
  EXPECT_THROW(solve_scattering(d, {1.0, 1.0}), InvalidArgument);
}
