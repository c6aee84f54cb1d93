#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace semicorr {

// Boundary condition at the surface z = 0. The bottom z = H is always Dirichlet.
enum class SurfaceBC { Neumann, Dirichlet };
std::string to_string(SurfaceBC bc);

// n(z) on [0, H], z = 0 the surface. Interfaces mark jumps of n; cell
// averages split their quadrature there so layer depths enter smoothly.
struct DepthProfile {
  double depth = 1;
  std::function<double(double)> n;
  std::vector<double> interfaces;
  SurfaceBC surface = SurfaceBC::Neumann;
  nlohmann::json spec;

  static DepthProfile constant(double n0, double depth, SurfaceBC bc = SurfaceBC::Neumann);
  // Piecewise constant: values[i] on [breaks[i-1], breaks[i]), breaks ascending in (0, depth).
  static DepthProfile layered(const std::vector<double>& values, const std::vector<double>& breaks, double depth,
                              SurfaceBC bc = SurfaceBC::Neumann);
  // Linear interpolation through (z, n) samples.
  static DepthProfile sampled(const Eigen::VectorXd& z, const Eigen::VectorXd& n, SurfaceBC bc = SurfaceBC::Neumann);

  void validate() const;
};

// Cell-centred discretization: z_j = (j + 1/2) h, h = H / points.
struct SturmLiouvilleModes {
  double xi = 0;
  Eigen::VectorXd z;
  Eigen::VectorXd values;     // ascending
  Eigen::MatrixXd functions;  // columns, sum_j u_j^2 h = 1, first nonzero entry positive
  std::vector<std::string> warnings;
};

// Lowest eigenpairs of L u = -(n u')' + n xi^2 u with the profile's boundary
// conditions: second-order symmetric finite differences, harmonic-mean face
// coefficients, cell-averaged potential.
SturmLiouvilleModes sturm_liouville_modes(const DepthProfile& prof, double xi, int n_modes, int points = 256);

struct DispersionCurve {
  int branch = 0;
  Eigen::VectorXd xi;
  Eigen::VectorXd values;  // lambda_branch(|xi|)
  Eigen::VectorXd slope;   // d lambda / d|xi|, centred differences
  SurfaceBC surface = SurfaceBC::Neumann;
  int points = 256;  // depth cells used
  bool near_degenerate = false;  // gap to a neighbouring branch below 1e-8 lambda somewhere
  std::vector<std::string> warnings;
};

DispersionCurve dispersion_curve(const DepthProfile& prof, const Eigen::VectorXd& xi, int branch = 0,
                                 int points = 256);

// lambda_branch(x0, |xi|) for a profile that varies slowly in x, each station
// solved on its own.
double effective_hamiltonian(const std::function<DepthProfile(double)>& profile_at, double x0, double xi,
                             int branch = 0, int points = 256);

// Profile family parametrized by theta (dimension <= 6).
struct ProfileFamily {
  std::string name;
  std::vector<std::string> parameters;
  std::function<DepthProfile(const Eigen::VectorXd&)> make;
  Eigen::VectorXd lower, upper;  // box for multistart draws and clamping
};

// theta = (n_top, n_bottom, interface depth).
ProfileFamily two_layer_family(double depth, SurfaceBC bc = SurfaceBC::Neumann);

struct InversionOptions {
  int points = 0;          // 0: the target's resolution
  int starts = 4;          // init plus starts - 1 deterministic perturbations
  int max_evaluations = 4000;
  double tolerance = 1e-14;
  // Residuals (lambda - target) / target / sqrt(m) instead of
  // (lambda - target) / ||target||; suits relative measurement noise.
  bool relative_misfit = false;
};

struct InversionReport {
  Eigen::VectorXd theta;
  DepthProfile profile;
  double residual = 0;                 // misfit norm, see InversionOptions::relative_misfit
  std::vector<double> history;         // accepted objective values (best start)
  Eigen::MatrixXd covariance;          // sigma^2 (J^T J)^{-1}
  bool converged = true;
  int evaluations = 0;
  std::vector<std::string> notes;

  nlohmann::json to_json(const ProfileFamily& family) const;
};

// Levenberg-Marquardt with finite-difference Jacobian from `init` and from
// deterministic perturbations of it; the best start wins.
InversionReport invert_profile(const DispersionCurve& target, const ProfileFamily& family,
                               const Eigen::VectorXd& init, const InversionOptions& opt = {});

void write_csv(const std::string& path, const DepthProfile& prof, int points = 256);
void write_csv(const std::string& path, const DispersionCurve& curve);

}  // namespace semicorr
