#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "semicorr/grid.hpp"

namespace semicorr {

// Smooth scalar field on R^d (d <= 2) with gradient and known bounds.
class ScalarField {
 public:
  // Returns f(x); writes the gradient when grad is non-null.
  using Eval = std::function<double(const Eigen::Vector2d& x, Eigen::Vector2d* grad)>;

  ScalarField() : ScalarField(constant(0.0)) {}
  ScalarField(Eval f, double lower, double upper) : f_(std::move(f)), lo_(lower), hi_(upper) {}

  static ScalarField constant(double v);
  // base + amplitude * exp(-|x - c|^2 / width^2)
  static ScalarField gaussian(double base, double amplitude, const Eigen::Vector2d& center, double width);

  double operator()(const Eigen::Vector2d& x) const { return f_(x, nullptr); }
  double eval(const Eigen::Vector2d& x, Eigen::Vector2d* grad) const { return f_(x, grad); }
  double lower() const { return lo_; }
  double upper() const { return hi_; }
  bool is_constant() const { return constant_; }

 private:
  Eval f_;
  double lo_ = 0, hi_ = 0;
  bool constant_ = false;
};

// Periodic cubic B-spline interpolant of grid samples (C^2, exact on nodes).
class PeriodicSpline {
 public:
  PeriodicSpline(const Grid& g, const Eigen::VectorXd& samples);
  double eval(const Eigen::Vector2d& x, Eigen::Vector2d* grad) const;
  const Grid& grid() const { return grid_; }

 private:
  Grid grid_;
  Eigen::VectorXd coef_;
};

// Coefficients of u_tt + a u_t - div(n grad u) = f: speed-squared factor n > 0
// and attenuation a >= 0. Immutable.
class Medium {
 public:
  Medium(int dim, ScalarField n, ScalarField a, nlohmann::json spec, std::optional<double> period = std::nullopt);

  static Medium homogeneous(int dim, double n0, double a0, std::optional<double> period = std::nullopt);
  // n = n0 + slope * x_axis
  static Medium linear(int dim, double n0, double slope, int axis, double a0);
  // n = n0 * (1 - depth * exp(-|x - c|^2 / sigma^2))
  static Medium gaussian_lens(int dim, double n0, double depth, double sigma, const Eigen::Vector2d& center,
                              double a0);
  // n = 1 + contrast * (sum of random Fourier modes, |k| <= kmax, sup-normalized),
  // periodic with the given box length.
  static Medium random_smooth(int dim, std::uint64_t seed, double contrast, double box, int kmax, double a0);
  // Spline interpolation of grid samples; periodic on the grid's box.
  static Medium from_grid(const Grid& g, const Eigen::VectorXd& n, const Eigen::VectorXd& a);
  // Preset object {"preset": "homogeneous" | "linear" | "gaussian-lens" |
  // "random-smooth" | "random-smooth(<seed>)" | "grid", ...}.
  static Medium from_json(const nlohmann::json& j);
  static Medium load(const std::string& path);
  void save(const std::string& path, const Grid& g) const;

  Medium with_attenuation(ScalarField a, const nlohmann::json& a_spec) const;

  int dim() const { return dim_; }
  double n(const Eigen::Vector2d& x) const { return n_(wrap(x)); }
  double n(const Eigen::Vector2d& x, Eigen::Vector2d* grad) const { return n_.eval(wrap(x), grad); }
  double a(const Eigen::Vector2d& x) const { return a_(wrap(x)); }
  double inf_n() const { return n_.lower(); }
  double sup_n() const { return n_.upper(); }
  double inf_a() const { return a_.lower(); }
  double sup_a() const { return a_.upper(); }
  bool constant_attenuation() const { return a_.is_constant(); }
  bool homogeneous_speed() const { return n_.is_constant(); }
  std::optional<double> period() const { return period_; }
  Eigen::Vector2d wrap(const Eigen::Vector2d& x) const;

  Eigen::VectorXd sample_n(const Grid& g) const;
  Eigen::VectorXd sample_a(const Grid& g) const;
  const nlohmann::json& spec() const { return spec_; }

 private:
  int dim_;
  ScalarField n_, a_;
  nlohmann::json spec_;
  std::optional<double> period_;
};

// 2 / inf a (infinite when inf a = 0).
double attenuation_time(const Medium& m);

}  // namespace semicorr
