#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "semicorr/correlation.hpp"
#include "semicorr/grid.hpp"
#include "semicorr/medium.hpp"
#include "semicorr/noise.hpp"
#include "semicorr/rays.hpp"

namespace semicorr {

struct ExposureOptions {
  double horizon = 0;  // backward time; 0 means 8 T_att
  double dt = 0;       // ray step; 0 means h / sqrt(sup n) (or 0.01 without a grid)
};

// pi_bar(x, xi) = eps^2 / (4 l0^2) int_0^inf e^{-A(s)} p(Phi_{-s}(x, xi)) ds,
// l0 = sqrt(n(x)) |xi|, A(s) = int_0^s a along the backward ray.
struct PredictedSymbol {
  Symbol pi_bar;  // real
  double horizon = 0;
  double ray_dt = 0;
  double l0_floor = 0;
  std::size_t masked = 0;  // nodes with l0 below the floor (set to 0)
  std::vector<std::string> warnings;
  nlohmann::json medium, noise;

  double masked_fraction() const;
};

struct PiBarOptions : ExposureOptions {
  double l0_floor = 0;  // 0 means half the smallest nonzero grid |xi| times sqrt(inf n)
  double mask_warning = 0.2;
};

// Backward rays from every x node on the unit |xi| shell (positions do not
// depend on |xi|), cubic Hermite interpolation per step with 3-point
// Gauss-Legendre quadrature, and the exponential tail p e^{-A_H} / a beyond
// the horizon.
PredictedSymbol pi_bar(const Medium& m, const NoiseModel& nm, const PiBarOptions& opt = {});

// int_0^H e^{-A(s)} p(Phi_{-s}(z0)) ds plus the exponential tail, for a single
// phase-space point (same quadrature as pi_bar).
double backward_exposure(const Medium& m, const PowerSpectrum& p, const PhasePoint& z0,
                         const ExposureOptions& opt = {});

enum class PairingMode {
  // C(tau) = Omega_-(tau) Op(pi_bar) + Omega_+(tau) Op(pi_bar(x, -xi))
  Corrected,
  // C(tau) = [Omega_+(tau) + Omega_-(tau)] Op(pi_bar)
  Literal,
};

struct PredictOptions {
  PairingMode pairing = PairingMode::Corrected;
  bool derivative = false;  // return dC/dtau from the generator form
};

// Dense operator predictor (1-D, N <= 512) on the lag grid l * dtau,
// |l| <= round(tau_max / dtau). Negative lags use C_AB(-tau) = C_BA(tau).
// Off-grid receivers use trigonometric interpolation of the kernel.
CorrelationRecord predict_correlation(const Medium& m, const PredictedSymbol& pb, const Eigen::Vector2d& a,
                                      const Eigen::Vector2d& b, double tau_max, double dtau,
                                      const PredictOptions& opt = {});
// Same for explicit positive lags (tau <= 0 rejected); one value per lag.
Eigen::VectorXd predict_correlation_at(const Medium& m, const PredictedSymbol& pb, const Eigen::Vector2d& a,
                                       const Eigen::Vector2d& b, const std::vector<double>& taus,
                                       const PredictOptions& opt = {});

struct RayContribution {
  Ray ray;  // the backward extension, starting at the launch point
  double m_gamma = 0;
  double horizon = 0;
};

// M_gamma = -1/2 int_0^inf e^{-A(s)} p(gamma(-s)) ds along the backward
// extension of the ray from its launch point. xi_norm > 0 rescales the launch
// covector to that length before evaluating p.
RayContribution m_gamma(const Ray& ray, const NoiseModel& nm, const Medium& m, const ExposureOptions& opt = {},
                        double xi_norm = 0);

struct AsymmetryFactor {
  double k = 0;
  double m_ab = 0;  // M of the ray leaving A toward B (sources behind A)
  double m_ba = 0;  // M of the ray leaving B toward A (sources behind B)
  bool one_sided = false;  // m_ba == 0: k undefined
  std::vector<std::string> notes;
};

struct AsymmetryOptions {
  ExposureOptions exposure;
  ShootOptions shoot;
  double xi_norm = 0;  // 0: mid-point of the spectrum's |xi| support, or 1
};

// k = C_AB(-tau) / C_AB(tau) ~ M(A->B) / M(B->A), with the connecting rays of
// travel time tau found by shooting.
AsymmetryFactor asymmetry_factor(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double tau, const Medium& m,
                                 const NoiseModel& nm, const AsymmetryOptions& opt = {});

// Least-squares amplitude ratio of C(-tau) to C(tau) over lo <= tau <= hi.
double empirical_asymmetry(const CorrelationRecord& rec, double lo, double hi);

}  // namespace semicorr
