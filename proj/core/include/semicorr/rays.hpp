#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semicorr/medium.hpp"

namespace semicorr {

struct PhasePoint {
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  Eigen::Vector2d xi = Eigen::Vector2d::Zero();
};

struct RaySample {
  double t = 0;
  PhasePoint z;
  double attenuation = 0;  // A(t) = int_0^t a(x(s)) ds (negative-time flows store int_t^0)
};

// Time-sampled trajectory of H = sqrt(n) |xi|.
struct Ray {
  int dim = 1;
  double hamiltonian = 0;
  std::vector<RaySample> samples;

  const RaySample& start() const { return samples.front(); }
  const RaySample& end() const { return samples.back(); }
  // Launch angle atan2(xi1, xi0) of the first sample.
  double launch_angle() const;
};

double hamiltonian(const Medium& m, const PhasePoint& z);

struct FlowOptions {
  // Relative H drift per step that triggers step rejection (retried with
  // halved substeps, then an error).
  double h_tolerance = 1e-9;
  int max_halvings = 8;
  bool record = true;  // keep every step; otherwise only start and end
};

// Classical RK4 for dx/dt = dH/dxi, dxi/dt = -dH/dx with A(t) alongside.
// Negative t flows backward; the last step is shortened to land on t.
Ray flow(const Medium& m, const PhasePoint& z0, double t, double dt, const FlowOptions& opt = {});

void write_csv(const std::string& path, const Ray& ray);

struct ShootOptions {
  int n_launch = 720;
  double domain_size = 1.0;
  double tol_shoot = 0.0;  // 0 means 1e-6 * domain_size
  double dedup_angle = 1e-3;
  double dt = 1e-2;
};

// Rays launched from B on the unit-H shell that reach A at time tau, within
// tol_shoot. Each is re-validated by re-integration at dt/10. May be empty.
std::vector<Ray> shoot(const Medium& m, const Eigen::Vector2d& B, const Eigen::Vector2d& A, double tau,
                       const ShootOptions& opt = {});

struct TimeScales {
  double lyapunov = 0;
  double t_lyap = 0;  // 1 / lyapunov (infinite when lyapunov <= 0)
  double t_att = 0;   // 2 / inf a
  bool converged = true;
  std::vector<double> running;  // estimate after each renormalization
};

struct LyapunovOptions {
  double dt = 0.05;
  double renorm_interval = 1.0;
  double fluctuation_limit = 0.2;
};

// Largest Lyapunov exponent along the trajectory from z0 over [0, T].
TimeScales lyapunov(const Medium& m, const PhasePoint& z0, double T, const LyapunovOptions& opt = {});

}  // namespace semicorr
