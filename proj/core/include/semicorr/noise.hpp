#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>

#include <nlohmann/json.hpp>

#include "semicorr/grid.hpp"

namespace semicorr {

// Phase-space power spectrum p(x, xi): real, >= 0, even in xi, with declared
// support bounds in |xi|. Closed-form callable so rays can evaluate it off-grid.
class PowerSpectrum {
 public:
  using Fn = std::function<double(const Eigen::Vector2d& x, const Eigen::Vector2d& xi)>;

  PowerSpectrum(Fn f, double xi_min, double xi_max, nlohmann::json spec);

  static PowerSpectrum zero();
  // p = level everywhere (not band-limited).
  static PowerSpectrum white(double level);
  // level * w(|xi| / eps): flat up to a quarter of the grid Nyquist
  // wavenumber, cos^2 taper to zero at half Nyquist, zero at xi = 0. The same
  // multiplier band-limits greens() sources.
  static PowerSpectrum band_flat(double level, const Grid& g, double eps);
  // level * bump(x) * annulus(|xi|): cos^2 bump of half-width `width` around
  // `center` (periodic distance when period > 0) times a cos^2 ring.
  static PowerSpectrum x_bump_xi_annulus(double level, const Eigen::Vector2d& center, double width, double xi_center,
                                         double xi_halfwidth, double period);
  // level * smooth indicator of lo < x_0 < hi (tanh edges of width `edge`) times
  // a cos^2 ring in |xi|.
  static PowerSpectrum half_domain(double level, double lo, double hi, double edge, double xi_center,
                                   double xi_halfwidth, double period);
  // level * exp(-|x - c|^2 / wx^2) * exp(-|xi|^2 / wxi^2)
  static PowerSpectrum gaussian(double level, const Eigen::Vector2d& center, double wx, double wxi, double period);
  // Samples on a 1-D grid (xi in FFT order): periodic spline in x, linear in
  // xi between slots.
  static PowerSpectrum from_symbol(const Symbol& s);
  static PowerSpectrum from_json(const nlohmann::json& j, const PhaseSpaceContext& ctx);

  double operator()(const Eigen::Vector2d& x, const Eigen::Vector2d& xi) const { return f_(x, xi); }
  double xi_min() const { return xi_min_; }
  double xi_max() const { return xi_max_; }
  const nlohmann::json& spec() const { return spec_; }
  bool is_zero() const { return zero_; }
  Symbol sample(const PhaseSpaceContext& ctx) const;

 private:
  Fn f_;
  double xi_min_, xi_max_;
  nlohmann::json spec_;
  bool zero_ = false;
};

// Dense correlation kernel Gamma(x_j, y_l) and a factor G with
// Gamma = G G^T (G already includes the 1/h^{d/2} scaling).
struct CorrelationKernel {
  PhaseSpaceContext ctx;
  Eigen::MatrixXd values;
  Eigen::MatrixXd factor;
};

// Source f(x, t), white in time, with covariance kernel
// Gamma = kernel of Op(sqrt p) Op(sqrt p)^*; flat p = 1 gives Gamma = delta.
// Draw k is f_k = F z / sqrt(dt), z ~ N(0, 1/h^d) i.i.d., keyed by
// (seed, realization, k), where F F^T = Op(sqrt p) Op(sqrt p)^T.
class NoiseModel {
 public:
  // Covariance modes with variance below rank_tolerance times the largest are dropped.
  NoiseModel(const PhaseSpaceContext& ctx, PowerSpectrum p, std::uint64_t seed, double dt,
             double rank_tolerance = 1e-13);

  const PhaseSpaceContext& context() const { return ctx_; }
  const PowerSpectrum& spectrum() const { return p_; }
  const Symbol& symbol() const { return sym_; }
  std::uint64_t seed() const { return seed_; }
  double dt() const { return dt_; }
  double rank_tolerance() const { return rank_tol_; }
  // Same spectrum and seed with a different step.
  NoiseModel with_dt(double dt) const;

  // Op(sqrt p) as a real matrix on nodal values (built on first use).
  const Eigen::MatrixXd& sqrt_operator() const;
  // Largest |Im Op(sqrt p)| relative to its largest entry.
  double imaginary_residue() const;
  // Low-rank factor F, columns ordered by decreasing variance.
  const Eigen::MatrixXd& factor() const;
  Eigen::Index rank() const { return factor().cols(); }

  GridFunction sample_source(long t_index, long realization = 0) const;
  // Columns of `out` receive realizations first, first+1, ...
  void sample_sources(long t_index, long first_realization, Eigen::Ref<Eigen::MatrixXd> out) const;
  // Latent normals z for (t_index, realization), scaled to N(0, 1/h^d).
  void latent(long t_index, long realization, std::span<double> z) const;

  CorrelationKernel gamma_kernel() const;

 private:
  struct Cache;
  PhaseSpaceContext ctx_;
  PowerSpectrum p_;
  Symbol sym_;
  std::uint64_t seed_;
  double dt_;
  double rank_tol_;
  std::shared_ptr<Cache> cache_;
};

// Ensemble mean of Wigner functions of the draws after scaling by sqrt(dt)
// (dt = 1 for already normalized fields). Throws on empty input.
Symbol estimate_power_spectrum(std::span<const GridFunction> draws, double dt = 1.0);

}  // namespace semicorr
