#include "semicorr/noise.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "semicorr/error.hpp"
#include "semicorr/grid_io.hpp"
#include "semicorr/medium.hpp"
#include "semicorr/phase_space.hpp"
#include "semicorr/rng.hpp"

namespace semicorr {

using std::numbers::pi;

namespace {

double ring(double k, double c, double w) {
  const double d = std::abs(k - c);
  if (d >= w) return 0.0;
  const double s = std::cos(0.5 * pi * d / w);
  return s * s;
}

double periodic_offset(double x, double c, double period) {
  double d = x - c;
  if (period > 0) d -= period * std::floor(d / period + 0.5);
  return d;
}

void require_level(double level) {
  if (!(level >= 0) || !std::isfinite(level)) throw InvalidArgument("power spectrum level must be >= 0");
}

Eigen::Vector2d vec_from_json(const nlohmann::json& j) {
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  if (j.is_number()) {
    v[0] = j.get<double>();
  } else {
    v[0] = j.at(0).get<double>();
    if (j.size() > 1) v[1] = j.at(1).get<double>();
  }
  return v;
}

}  // namespace

PowerSpectrum::PowerSpectrum(Fn f, double xi_min, double xi_max, nlohmann::json spec)
    : f_(std::move(f)), xi_min_(xi_min), xi_max_(xi_max), spec_(std::move(spec)) {
  if (!(xi_min >= 0) || !(xi_max >= xi_min)) throw InvalidArgument("power spectrum: bad xi support bounds");
}

PowerSpectrum PowerSpectrum::zero() {
  PowerSpectrum p([](const Eigen::Vector2d&, const Eigen::Vector2d&) { return 0.0; }, 0.0, 0.0,
                  {{"preset", "zero"}});
  p.zero_ = true;
  return p;
}

PowerSpectrum PowerSpectrum::white(double level) {
  require_level(level);
  if (level == 0) return zero();
  return PowerSpectrum([level](const Eigen::Vector2d&, const Eigen::Vector2d&) { return level; }, 0.0,
                       std::numeric_limits<double>::infinity(), {{"preset", "white"}, {"level", level}});
}

PowerSpectrum PowerSpectrum::band_flat(double level, const Grid& g, double eps) {
  require_level(level);
  if (level == 0) return zero();
  const double kn = pi / g.h();
  const double k1 = kn / 4, k2 = kn / 2;
  auto f = [=](const Eigen::Vector2d&, const Eigen::Vector2d& xi) {
    const double k = xi.norm() / eps;
    if (k == 0.0 || k >= k2) return 0.0;
    if (k <= k1) return level;
    const double c = std::cos(0.5 * pi * (k - k1) / (k2 - k1));
    return level * c * c;
  };
  return PowerSpectrum(f, 0.0, eps * k2, {{"preset", "flat"}, {"level", level}});
}

PowerSpectrum PowerSpectrum::x_bump_xi_annulus(double level, const Eigen::Vector2d& center, double width,
                                               double xi_center, double xi_halfwidth, double period) {
  require_level(level);
  if (!(width > 0) || !(xi_halfwidth > 0) || !(xi_center >= 0)) throw InvalidArgument("x-bump x xi-annulus: bad shape");
  auto f = [=](const Eigen::Vector2d& x, const Eigen::Vector2d& xi) {
    const double dx = periodic_offset(x[0], center[0], period), dy = periodic_offset(x[1], center[1], period);
    return level * ring(std::hypot(dx, dy), 0.0, width) * ring(xi.norm(), xi_center, xi_halfwidth);
  };
  return PowerSpectrum(f, std::max(0.0, xi_center - xi_halfwidth), xi_center + xi_halfwidth,
                       {{"preset", "x-bump-xi-annulus"},
                        {"level", level},
                        {"center", {center[0], center[1]}},
                        {"width", width},
                        {"xi_center", xi_center},
                        {"xi_halfwidth", xi_halfwidth},
                        {"period", period}});
}

PowerSpectrum PowerSpectrum::half_domain(double level, double lo, double hi, double edge, double xi_center,
                                         double xi_halfwidth, double period) {
  require_level(level);
  if (!(hi > lo) || !(edge > 0) || !(xi_halfwidth > 0)) throw InvalidArgument("half-domain: bad shape");
  const double mid = 0.5 * (lo + hi);
  auto f = [=](const Eigen::Vector2d& x, const Eigen::Vector2d& xi) {
    const double y = mid + periodic_offset(x[0], mid, period);
    const double chi = 0.25 * (1 + std::tanh((y - lo) / edge)) * (1 - std::tanh((y - hi) / edge));
    return level * chi * ring(xi.norm(), xi_center, xi_halfwidth);
  };
  return PowerSpectrum(f, std::max(0.0, xi_center - xi_halfwidth), xi_center + xi_halfwidth,
                       {{"preset", "half-domain"},
                        {"level", level},
                        {"lo", lo},
                        {"hi", hi},
                        {"edge", edge},
                        {"xi_center", xi_center},
                        {"xi_halfwidth", xi_halfwidth},
                        {"period", period}});
}

PowerSpectrum PowerSpectrum::gaussian(double level, const Eigen::Vector2d& center, double wx, double wxi,
                                      double period) {
  require_level(level);
  if (!(wx > 0) || !(wxi > 0)) throw InvalidArgument("gaussian spectrum: widths must be positive");
  auto f = [=](const Eigen::Vector2d& x, const Eigen::Vector2d& xi) {
    const double dx = periodic_offset(x[0], center[0], period), dy = periodic_offset(x[1], center[1], period);
    return level * std::exp(-(dx * dx + dy * dy) / (wx * wx) - xi.squaredNorm() / (wxi * wxi));
  };
  return PowerSpectrum(f, 0.0, std::numeric_limits<double>::infinity(),
                       {{"preset", "gaussian"},
                        {"level", level},
                        {"center", {center[0], center[1]}},
                        {"width_x", wx},
                        {"width_xi", wxi},
                        {"period", period}});
}

PowerSpectrum PowerSpectrum::from_symbol(const Symbol& s) {
  const auto& ctx = s.ctx;
  if (ctx.dim() != 1) throw InvalidArgument("grid power spectra are 1-D only");
  if (!s.is_real(1e-12 * std::max(1.0, s.values.cwiseAbs().maxCoeff())))
    throw InvalidArgument("power spectrum must be real");
  const int n = ctx.n();
  auto columns = std::make_shared<std::vector<PeriodicSpline>>();
  for (int m = 0; m < n; ++m) columns->emplace_back(ctx.grid, s.values.col(m).real());
  const double dxi = ctx.dxi();
  double xi_max = 0;
  for (int m = 0; m < n; ++m)
    if (s.values.col(m).real().cwiseAbs().maxCoeff() > 0) xi_max = std::max(xi_max, std::abs(ctx.xi(m)) + dxi);
  auto f = [columns, n, dxi](const Eigen::Vector2d& x, const Eigen::Vector2d& xi) {
    const double pos = xi[0] / dxi + n / 2;  // sorted coordinate
    const int i = static_cast<int>(std::floor(pos));
    if (i < 0 || i >= n - 1) return 0.0;
    const double t = pos - i;
    auto slot = [n](int sorted) { return (sorted + n / 2) % n; };
    const double a = (*columns)[slot(i)].eval(x, nullptr), b = (*columns)[slot(i + 1)].eval(x, nullptr);
    return std::max(0.0, (1 - t) * a + t * b);
  };
  return PowerSpectrum(f, 0.0, xi_max, {{"preset", "grid"}});
}

PowerSpectrum PowerSpectrum::from_json(const nlohmann::json& j, const PhaseSpaceContext& ctx) {
  const std::string preset = j.at("preset").get<std::string>();
  const double level = j.value("level", 1.0);
  const double period = j.value("period", ctx.grid.length);
  if (preset == "zero") return zero();
  if (preset == "white") return white(level);
  if (preset == "flat") return band_flat(level, ctx.grid, ctx.epsilon);
  if (preset == "x-bump-xi-annulus" || preset == "x-bump×ξ-annulus")
    return x_bump_xi_annulus(level, vec_from_json(j.at("center")), j.at("width").get<double>(),
                             j.value("xi_center", 1.0), j.value("xi_halfwidth", 0.5), period);
  if (preset == "half-domain")
    return half_domain(level, j.value("lo", 0.05 * ctx.grid.length), j.value("hi", 0.45 * ctx.grid.length),
                       j.value("edge", 0.02 * ctx.grid.length), j.value("xi_center", 1.0),
                       j.value("xi_halfwidth", 0.5), period);
  if (preset == "gaussian")
    return gaussian(level, vec_from_json(j.at("center")), j.at("width_x").get<double>(),
                    j.at("width_xi").get<double>(), period);
  if (preset == "grid") {
    PowerSpectrum p = from_symbol(load_symbol(j.at("file").get<std::string>()));
    p.spec_ = j;
    return p;
  }
  throw InvalidArgument("unknown noise preset '" + preset + "'");
}

Symbol PowerSpectrum::sample(const PhaseSpaceContext& ctx) const {
  Symbol s = Symbol::sample(ctx, [this](const Eigen::Vector2d& x, const Eigen::Vector2d& xi) { return f_(x, xi); });
  return s;
}

struct NoiseModel::Cache {
  std::once_flag sqrt_once, factor_once;
  Eigen::MatrixXd sqrt_op;
  double imag_residue = 0;
  Eigen::MatrixXd factor;
};

NoiseModel::NoiseModel(const PhaseSpaceContext& ctx, PowerSpectrum p, std::uint64_t seed, double dt,
                       double rank_tolerance)
    : ctx_(ctx), p_(std::move(p)), seed_(seed), dt_(dt), rank_tol_(rank_tolerance), cache_(std::make_shared<Cache>()) {
  ctx_.validate();
  if (!(rank_tolerance >= 0 && rank_tolerance < 1)) throw InvalidArgument("noise model: rank_tolerance must lie in [0, 1)");
  if (!(dt > 0) || !std::isfinite(dt)) throw InvalidArgument("noise model: dt must be positive");
  sym_ = p_.sample(ctx_);
  const Eigen::MatrixXd re = sym_.values.real();
  if (!re.allFinite()) throw NumericalError("noise model: power spectrum is not finite");
  if (re.minCoeff() < 0) throw InvalidArgument("noise model: power spectrum is negative somewhere");
  const double scale = std::max(re.maxCoeff(), 1e-300);
  const auto sz = static_cast<Eigen::Index>(ctx_.size());
  for (Eigen::Index m = 0; m < sz; ++m) {
    const auto mm = static_cast<Eigen::Index>(mirror_xi_index(ctx_.grid, static_cast<std::size_t>(m)));
    if ((re.col(m) - re.col(mm)).cwiseAbs().maxCoeff() > 1e-14 * scale)
      throw InvalidArgument("noise model: power spectrum must be even in xi");
  }
}

NoiseModel NoiseModel::with_dt(double dt) const {
  NoiseModel m = *this;
  if (!(dt > 0)) throw InvalidArgument("noise model: dt must be positive");
  m.dt_ = dt;
  return m;
}

const Eigen::MatrixXd& NoiseModel::sqrt_operator() const {
  std::call_once(cache_->sqrt_once, [this] {
    require_dense_size(ctx_, "noise model");
    Symbol root(ctx_, sym_.values.real().cwiseMax(0.0).cwiseSqrt().cast<cplx>());
    const Eigen::MatrixXcd m = weyl_matrix(root);
    const double mx = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
    cache_->imag_residue = m.imag().cwiseAbs().maxCoeff() / mx;
    cache_->sqrt_op = m.real();
  });
  return cache_->sqrt_op;
}

double NoiseModel::imaginary_residue() const {
  sqrt_operator();
  return cache_->imag_residue;
}

const Eigen::MatrixXd& NoiseModel::factor() const {
  std::call_once(cache_->factor_once, [this] {
    const auto sz = static_cast<Eigen::Index>(ctx_.size());
    if (p_.is_zero()) {
      cache_->factor = Eigen::MatrixXd::Zero(sz, 0);
      return;
    }
    const Eigen::MatrixXd& m = sqrt_operator();
    const Eigen::MatrixXd g = m * m.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()));
    if (es.info() != Eigen::Success) throw NumericalError("noise model: eigensolver failed");
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    if (!(top > 0)) {
      cache_->factor = Eigen::MatrixXd::Zero(sz, 0);
      return;
    }
    if (ev.minCoeff() < -1e-10 * top) throw NumericalError("noise model: covariance not positive semidefinite");
    Eigen::Index keep = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (ev(i) > rank_tol_ * top) ++keep;
    Eigen::MatrixXd f(sz, keep);
    // Eigen sorts ascending; store by decreasing variance.
    for (Eigen::Index k = 0; k < keep; ++k) {
      const Eigen::Index i = ev.size() - 1 - k;
      Eigen::VectorXd v = es.eigenvectors().col(i);
      // Fix the sign so the factor does not depend on solver conventions.
      Eigen::Index arg;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0) v = -v;
      f.col(k) = v * std::sqrt(ev(i));
    }
    cache_->factor = std::move(f);
  });
  return cache_->factor;
}

void NoiseModel::latent(long t_index, long realization, std::span<double> z) const {
  CounterRng rng(seed_, static_cast<std::uint64_t>(realization), static_cast<std::uint64_t>(t_index));
  rng.fill_normal(z, 1.0 / std::sqrt(std::pow(ctx_.h(), ctx_.dim())));
}

void NoiseModel::sample_sources(long t_index, long first_realization, Eigen::Ref<Eigen::MatrixXd> out) const {
  const auto sz = static_cast<Eigen::Index>(ctx_.size());
  if (out.rows() != sz) throw InvalidArgument("sample_sources: output rows must be N^d");
  const Eigen::MatrixXd& f = factor();
  if (f.cols() == 0) {
    out.setZero();
    return;
  }
  Eigen::MatrixXd z(f.cols(), out.cols());
  for (Eigen::Index c = 0; c < out.cols(); ++c)
    latent(t_index, first_realization + c, std::span<double>(z.col(c).data(), static_cast<std::size_t>(f.cols())));
  out.noalias() = f * z / std::sqrt(dt_);
}

GridFunction NoiseModel::sample_source(long t_index, long realization) const {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(ctx_.size()), 1);
  sample_sources(t_index, realization, v);
  return GridFunction(ctx_, v.col(0).cast<cplx>());
}

CorrelationKernel NoiseModel::gamma_kernel() const {
  require_dense_size(ctx_, "gamma_kernel");
  const double hd = std::pow(ctx_.h(), ctx_.dim());
  CorrelationKernel k{ctx_, Eigen::MatrixXd(), factor() / std::sqrt(hd)};
  k.values = k.factor * k.factor.transpose();
  k.values = 0.5 * (k.values + k.values.transpose()).eval();
  return k;
}

Symbol estimate_power_spectrum(std::span<const GridFunction> draws, double dt) {
  if (draws.empty()) throw InvalidArgument("estimate_power_spectrum: no realizations");
  if (draws.size() < 2) throw InvalidArgument("estimate_power_spectrum: need at least 2 realizations");
  if (!(dt > 0)) throw InvalidArgument("estimate_power_spectrum: dt must be positive");
  const auto& ctx = draws.front().ctx;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ctx.size()), static_cast<Eigen::Index>(ctx.size()));
  for (const auto& d : draws) {
    require_same_context(ctx, d.ctx, "estimate_power_spectrum");
    GridFunction u(ctx, d.values * std::sqrt(dt));
    acc += wigner(u).values;
  }
  acc /= static_cast<double>(draws.size());
  return Symbol(ctx, acc.cast<cplx>());
}

}  // namespace semicorr
