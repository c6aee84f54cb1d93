#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "semicorr/grid.hpp"
#include "semicorr/medium.hpp"

namespace semicorr {

namespace detail {
class RealFftBatch;
}

inline constexpr double kDefaultCfl = 0.5;
// Hard stability bound of leapfrog with the spectral operator is 2/pi.
inline constexpr double kMaxCfl = 0.6;

// cfl * h / (sqrt(sup n) * sqrt(d))
double cfl_time_step(const Medium& m, const Grid& g, double cfl = kDefaultCfl);

// Band-limit multiplier w(|k|): 1 up to a quarter of the Nyquist wavenumber,
// cos^2 taper to zero at half Nyquist, w(0) = 0.
double band_limit(double k, const Grid& g);
// w applied to the unit-mass delta at a node (values ~ 1/h^d at the node).
Eigen::VectorXd band_limited_delta(const Grid& g, std::size_t node);

// Spectral div(n grad .) on the periodic grid, applied to the columns of a
// matrix. The derivative of the Nyquist mode is zeroed so the operator is
// symmetric and negative semidefinite.
class WaveOperator {
 public:
  WaveOperator(const Medium& m, const Grid& g, int batch);
  ~WaveOperator();
  WaveOperator(const WaveOperator&) = delete;
  WaveOperator& operator=(const WaveOperator&) = delete;

  const Grid& grid() const { return grid_; }
  int batch() const { return batch_; }
  // out = div(n grad in); both N^d x batch.
  void apply(const Eigen::MatrixXd& in, Eigen::MatrixXd& out);
  // Dense symmetric matrix of -div(n grad) (small grids only).
  Eigen::MatrixXd dense_negative();

 private:
  Grid grid_;
  int batch_;
  bool homogeneous_;
  double n0_ = 0;
  Eigen::VectorXd n_nodes_;
  std::vector<double> k0_, k1_;  // derivative multipliers per spectral slot
  std::unique_ptr<detail::RealFftBatch> fft_, g0_, g1_;
};

// Snapshot of one realization: u at time t and at t - dt (leapfrog needs
// both). u_t is reported as the backward difference.
struct WaveState {
  Grid grid;
  double dt = 0;
  double t = 0;
  long step = 0;
  Eigen::VectorXd u, u_prev;
  nlohmann::json medium;

  Eigen::VectorXd velocity() const { return (u - u_prev) / dt; }
};

void save_checkpoint(const std::string& path, const WaveState& s);
WaveState load_checkpoint(const std::string& path);

// Leapfrog for u_tt + a u_t - div(n grad u) = f with centered damping,
// `batch` independent realizations stored as columns.
class WaveSolver {
 public:
  WaveSolver(const Medium& m, const Grid& g, double dt, int batch = 1, double cfl = kDefaultCfl);

  const Grid& grid() const { return op_.grid(); }
  int batch() const { return op_.batch(); }
  double dt() const { return dt_; }
  double time() const { return static_cast<double>(step_) * dt_; }
  long step_index() const { return step_; }

  // One step with forcing f (N^d x batch) evaluated at the current time.
  void step(const Eigen::MatrixXd& f);
  // One unforced step.
  void step();

  const Eigen::MatrixXd& u() const { return u_; }
  const Eigen::MatrixXd& u_prev() const { return up_; }
  // Initial data u(0) = u0 and u(-dt) = u_prev (columns).
  void set_fields(const Eigen::MatrixXd& u0, const Eigen::MatrixXd& u_prev);

  // Leapfrog energy between the last two levels,
  // 1/2 [|(u - u_prev)/dt|^2 + <u, -L u_prev>] h^d; conserved when a = 0.
  double energy(int col = 0);

  WaveState state(int col = 0) const;
  // Restores column `col`; grid and dt must match.
  void set_state(const WaveState& s, int col = 0);

 private:
  void advance(const Eigen::MatrixXd* f);

  WaveOperator op_;
  double dt_;
  long step_ = 0;
  Eigen::VectorXd a_;
  Eigen::MatrixXd u_, up_, lu_;
  nlohmann::json medium_spec_;
};

// Impulse response G(t_j, receiver, source), t_j = j dt, j = 0..steps.
struct GreensFunction {
  Grid grid;
  double dt = 0;
  std::size_t source_node = 0;
  std::vector<std::size_t> receiver_nodes;
  std::vector<std::string> warnings;
  Eigen::MatrixXd samples;  // rows time, columns receivers

  Eigen::VectorXd times() const;
};

// Source: band-limited delta at y_src (must be a node) kicked into u_t with
// unit area, i.e. forcing band_limited_delta / dt during the first step.
// Receivers off the grid snap to the nearest node with a warning.
GreensFunction greens(const Medium& m, const Grid& g, const Eigen::Vector2d& y_src,
                      const std::vector<Eigen::Vector2d>& receivers, double T, double dt = 0);

// Full-field impulse responses from several source nodes at once; calls
// visit(j, U) for j = 0..steps with U(:, s) = G(t_j, ., source s).
void impulse_fields(const Medium& m, const Grid& g, const std::vector<std::size_t>& sources, long steps,
                    double dt, const std::function<void(long, const Eigen::MatrixXd&)>& visit);

// Eigendecomposition of the discrete -div(n grad) (1-D, N <= 512), basis of
// the half-wave groups Omega_+-(t) = exp(t(+-i sqrt(-L) - a/2)).
class HalfWaveBasis {
 public:
  HalfWaveBasis(const Medium& m, const Grid& g);

  const Grid& grid() const { return grid_; }
  const Eigen::VectorXd& eigenvalues() const { return mu_; }  // ascending, >= 0
  const Eigen::MatrixXd& eigenvectors() const { return v_; }  // orthonormal columns
  const Eigen::VectorXd& attenuation() const { return a_; }
  bool constant_attenuation() const { return const_a_; }
  double a0() const { return a0_; }
  // sqrt(-L) in grid basis.
  Eigen::MatrixXd sqrt_operator() const;

 private:
  Grid grid_;
  Eigen::VectorXd mu_, a_;
  Eigen::MatrixXd v_;
  bool const_a_;
  double a0_;
};

struct HalfWavePropagator {
  Grid grid;
  double t = 0;
  Eigen::MatrixXcd plus, minus;
};

HalfWavePropagator half_wave(const HalfWaveBasis& b, double t);
HalfWavePropagator half_wave(const Medium& m, const Grid& g, double t);

// Semiclassical Green's matrix (1/2i)(Omega_+ - Omega_-)(t) sqrt(-L)^-1,
// restricted to the nonzero modes; apply to nodal source values.
Eigen::MatrixXd semiclassical_greens(const HalfWaveBasis& b, double t);

}  // namespace semicorr
