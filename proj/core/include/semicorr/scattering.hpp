#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

namespace semicorr {

using cplxd = std::complex<double>;

// div(n grad e) + omega^2 e = 0 on the square [-L/2, L/2]^2 (d = 2), n = n0
// outside a disk of radius support_radius around support_center. The outer
// `layer` is a perfectly matched layer; e = 0 on the box edge.
struct HelmholtzSetup {
  double n0 = 1;
  double omega = 4;
  double length = 6;
  int cells = 192;  // grid cells per axis, h = length / cells
  double layer = 1.6;
  double layer_strength = 0;  // sigma_max; 0: reflection ~ e^-18 for the continuous layer
  std::function<double(const Eigen::Vector2d&)> n;  // unset: n0 everywhere
  Eigen::Vector2d support_center = Eigen::Vector2d::Zero();
  double support_radius = 0;
  bool sharp_boundary = false;  // support circle is a jump of n (points must keep off it)
  nlohmann::json spec;

  static HelmholtzSetup free_space(double n0, double omega, double length, int cells, double layer);
  // Penetrable disk n = n_inside for |x - c| < radius.
  static HelmholtzSetup disk(double n0, double n_inside, double radius, const Eigen::Vector2d& center, double omega,
                             double length, int cells, double layer);

  double k() const { return omega / std::sqrt(n0); }
  double h() const { return length / cells; }
  double n_at(const Eigen::Vector2d& x) const { return n ? n(x) : n0; }
  void validate() const;
};

// Outgoing free-space Green's function of div(n0 grad) + omega^2:
// G0 = -(i / (4 n0)) H0^(1)(k r).
cplxd free_space_green(const HelmholtzSetup& s, const Eigen::Vector2d& x, const Eigen::Vector2d& y);

struct ScatteringSolution {
  Eigen::Vector2d khat;
  int cells = 0;
  double length = 0;
  Eigen::VectorXcd total;      // interior nodes (cells - 1)^2, x index fastest
  Eigen::VectorXcd scattered;  // e^s = e - e0
  Eigen::VectorXd far_angles;
  // e^s ~ e^{ikr} r^{-1/2} e_inf(xhat) as r -> infinity
  Eigen::VectorXcd far_field;
};

// Assembled operator with its sparse LU factorization, reused across right-hand sides.
class HelmholtzSolver {
 public:
  explicit HelmholtzSolver(const HelmholtzSetup& s);
  ~HelmholtzSolver();
  HelmholtzSolver(const HelmholtzSolver&) = delete;
  HelmholtzSolver& operator=(const HelmholtzSolver&) = delete;

  const HelmholtzSetup& setup() const { return setup_; }
  int nodes_per_axis() const { return setup_.cells - 1; }
  Eigen::Vector2d node(int i, int j) const;
  Eigen::Index index(int i, int j) const { return static_cast<Eigen::Index>(j) * nodes_per_axis() + i; }

  // Plane wave e^{i k khat . x} on the nodes.
  Eigen::VectorXcd plane_wave(const Eigen::Vector2d& khat) const;
  // Q u = -div_h((n - n0) grad_h u): the scattered-field source of u.
  Eigen::VectorXcd perturbation_source(const Eigen::VectorXcd& u) const;
  Eigen::VectorXcd solve(const Eigen::VectorXcd& rhs) const;
  // Bilinear interpolation weights of point x.
  Eigen::SparseVector<cplxd> interpolation(const Eigen::Vector2d& x) const;
  // w = A^{-1} r_x (A is complex symmetric): e^s(x) = w^T Q e0 for any incident field.
  Eigen::VectorXcd receiver_adjoint(const Eigen::Vector2d& x) const;
  // Far-field pattern of a total field e on the given angles.
  Eigen::VectorXcd far_field(const Eigen::VectorXcd& total, const Eigen::VectorXd& angles) const;
  // Relative residual of the last solve.
  double last_residual() const { return last_residual_; }

 private:
  HelmholtzSetup setup_;
  Eigen::SparseMatrix<cplxd> a_, q_;
  struct Factor;
  std::unique_ptr<Factor> lu_;
  mutable double last_residual_ = 0;
};

ScatteringSolution solve_scattering(const HelmholtzSolver& solver, const Eigen::Vector2d& khat, int far_samples = 64);
ScatteringSolution solve_scattering(const HelmholtzSetup& setup, const Eigen::Vector2d& khat, int far_samples = 64);

struct AngularCorrelation {
  cplxd value;
  cplxd half_value;      // same with every second direction
  double discrepancy = 0;  // |value - half_value| / |value|
  int n_dirs = 0;
  std::vector<std::string> warnings;
};

// C(x, y) = int_{|khat| = 1} e(x, k khat) conj(e(y, k khat)) dsigma (total
// measure 2 pi), trapezoid rule on n_dirs equispaced directions.
AngularCorrelation angular_average_correlation(const HelmholtzSolver& solver, const Eigen::Vector2d& x,
                                               const Eigen::Vector2d& y, int n_dirs = 128);
AngularCorrelation angular_average_correlation(const HelmholtzSetup& setup, const Eigen::Vector2d& x,
                                               const Eigen::Vector2d& y, int n_dirs = 128);

struct ImGReport {
  cplxd lhs;        // angular-average correlation
  cplxd green;      // G(omega + i0, x, y)
  double rhs = 0;   // -(2^{d+1} pi^{d-1} n0^{d/2} / omega^{d-2}) Im G, d = 2
  double relative_error = 0;
  int n_dirs = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

// Checks C(x, y) = -8 pi n0 Im G(x, y). G = G0 + G^s with the scattered part
// from a point source at y on the same solver.
ImGReport verify_im_g_identity(const HelmholtzSolver& solver, const Eigen::Vector2d& x, const Eigen::Vector2d& y,
                               int n_dirs = 128);
ImGReport verify_im_g_identity(const HelmholtzSetup& setup, const Eigen::Vector2d& x, const Eigen::Vector2d& y,
                               int n_dirs = 128);

// Partial-wave far field of a penetrable disk (centre at the origin, incident
// direction angle 0), same normalization as ScatteringSolution::far_field.
Eigen::VectorXcd disk_far_field(double n0, double n_inside, double radius, double omega, const Eigen::VectorXd& angles,
                                int terms = 0);

void write_csv(const std::string& path, const ScatteringSolution& s);

}  // namespace semicorr
