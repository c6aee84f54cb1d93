#include "semicorr/medium.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "fft.hpp"
#include "semicorr/error.hpp"
#include "semicorr/grid_io.hpp"
#include "semicorr/rng.hpp"

namespace semicorr {

using std::numbers::pi;

ScalarField ScalarField::constant(double v) {
  ScalarField f(
      [v](const Eigen::Vector2d&, Eigen::Vector2d* g) {
        if (g) g->setZero();
        return v;
      },
      v, v);
  f.constant_ = true;
  return f;
}

ScalarField ScalarField::gaussian(double base, double amplitude, const Eigen::Vector2d& center, double width) {
  if (!(width > 0)) throw InvalidArgument("gaussian field width must be positive");
  const double lo = std::min(base, base + amplitude), hi = std::max(base, base + amplitude);
  return ScalarField(
      [=](const Eigen::Vector2d& x, Eigen::Vector2d* g) {
        const Eigen::Vector2d d = x - center;
        const double e = amplitude * std::exp(-d.squaredNorm() / (width * width));
        if (g) *g = -2.0 * e * d / (width * width);
        return base + e;
      },
      lo, hi);
}

namespace {

// Cubic B-spline weights and derivatives at fractional offset t.
void bspline_weights(double t, double w[4], double dw[4]) {
  const double t2 = t * t, t3 = t2 * t, s = 1 - t;
  w[0] = s * s * s / 6;
  w[1] = (3 * t3 - 6 * t2 + 4) / 6;
  w[2] = (-3 * t3 + 3 * t2 + 3 * t + 1) / 6;
  w[3] = t3 / 6;
  dw[0] = -s * s / 2;
  dw[1] = (9 * t2 - 12 * t) / 6;
  dw[2] = (-9 * t2 + 6 * t + 3) / 6;
  dw[3] = t2 / 2;
}

}  // namespace

PeriodicSpline::PeriodicSpline(const Grid& g, const Eigen::VectorXd& samples) : grid_(g) {
  g.validate();
  if (samples.size() != static_cast<Eigen::Index>(g.size())) throw InvalidArgument("spline samples must be N^d");
  Eigen::VectorXcd c = samples.cast<cplx>();
  detail::dft_vector(c, g.dim, g.n, -1);
  const int n = g.n;
  for (Eigen::Index idx = 0; idx < c.size(); ++idx) {
    const auto ij = g.unflatten(static_cast<std::size_t>(idx));
    double den = (4.0 + 2.0 * std::cos(2 * pi * ij[0] / n)) / 6.0;
    if (g.dim == 2) den *= (4.0 + 2.0 * std::cos(2 * pi * ij[1] / n)) / 6.0;
    c(idx) /= den;
  }
  detail::dft_vector(c, g.dim, g.n, +1);
  coef_ = c.real() / static_cast<double>(g.size());
}

double PeriodicSpline::eval(const Eigen::Vector2d& x, Eigen::Vector2d* grad) const {
  const double h = grid_.h();
  double w0[4], d0[4], w1[4] = {0, 1, 0, 0}, d1[4] = {0, 0, 0, 0};
  const double s0 = x[0] / h;
  const int i0 = static_cast<int>(std::floor(s0));
  bspline_weights(s0 - i0, w0, d0);
  int i1 = 0;
  if (grid_.dim == 2) {
    const double s1 = x[1] / h;
    i1 = static_cast<int>(std::floor(s1));
    bspline_weights(s1 - i1, w1, d1);
  }
  double v = 0, g0 = 0, g1 = 0;
  const int kmax = grid_.dim == 2 ? 4 : 1;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < kmax; ++b) {
      const int jb = grid_.dim == 2 ? i1 + b - 1 : 0;
      const double c = coef_(static_cast<Eigen::Index>(grid_.flatten(i0 + a - 1, jb)));
      const double wb = grid_.dim == 2 ? w1[b] : 1.0;
      v += c * w0[a] * wb;
      g0 += c * d0[a] * wb;
      if (grid_.dim == 2) g1 += c * w0[a] * d1[b];
    }
  if (grad) *grad = Eigen::Vector2d(g0 / h, g1 / h);
  return v;
}

Medium::Medium(int dim, ScalarField n, ScalarField a, nlohmann::json spec, std::optional<double> period)
    : dim_(dim), n_(std::move(n)), a_(std::move(a)), spec_(std::move(spec)), period_(period) {
  if (dim != 1 && dim != 2) throw InvalidArgument("medium dimension must be 1 or 2");
  if (!(n_.lower() > 0)) throw InvalidArgument("medium requires inf n > 0");
  if (a_.lower() < 0) throw InvalidArgument("medium requires a >= 0");
  if (period_ && !(*period_ > 0)) throw InvalidArgument("medium period must be positive");
}

Eigen::Vector2d Medium::wrap(const Eigen::Vector2d& x) const {
  Eigen::Vector2d y = x;
  if (dim_ == 1) y[1] = 0.0;
  if (period_) {
    const double p = *period_;
    for (int k = 0; k < dim_; ++k) y[k] -= p * std::floor(y[k] / p);
  }
  return y;
}

Medium Medium::homogeneous(int dim, double n0, double a0, std::optional<double> period) {
  return Medium(dim, ScalarField::constant(n0), ScalarField::constant(a0),
                {{"preset", "homogeneous"}, {"dim", dim}, {"n0", n0}, {"a0", a0}}, period);
}

Medium Medium::linear(int dim, double n0, double slope, int axis, double a0) {
  if (axis < 0 || axis >= dim) throw InvalidArgument("linear medium axis out of range");
  // A ramp has no global bounds; positivity is enforced where evaluated.
  ScalarField n(
      [=](const Eigen::Vector2d& x, Eigen::Vector2d* g) {
        if (g) {
          g->setZero();
          (*g)[axis] = slope;
        }
        const double v = n0 + slope * x[axis];
        if (!(v > 0)) throw NumericalError("linear medium: n <= 0 at evaluated point");
        return v;
      },
      std::numeric_limits<double>::min(), std::numeric_limits<double>::infinity());
  return Medium(dim, n, ScalarField::constant(a0),
                {{"preset", "linear"}, {"dim", dim}, {"n0", n0}, {"slope", slope}, {"axis", axis}, {"a0", a0}});
}

Medium Medium::gaussian_lens(int dim, double n0, double depth, double sigma, const Eigen::Vector2d& center,
                             double a0) {
  if (!(depth < 1)) throw InvalidArgument("gaussian lens depth must be < 1");
  Eigen::Vector2d c = center;
  if (dim == 1) c[1] = 0;
  return Medium(dim, ScalarField::gaussian(n0, -n0 * depth, c, sigma), ScalarField::constant(a0),
                {{"preset", "gaussian-lens"},
                 {"dim", dim},
                 {"n0", n0},
                 {"depth", depth},
                 {"sigma", sigma},
                 {"center", {c[0], c[1]}},
                 {"a0", a0}});
}

Medium Medium::random_smooth(int dim, std::uint64_t seed, double contrast, double box, int kmax, double a0) {
  if (!(contrast >= 0 && contrast < 1)) throw InvalidArgument("random medium contrast must be in [0, 1)");
  if (kmax < 1) throw InvalidArgument("random medium needs kmax >= 1");
  struct Mode {
    double k0, k1, amp, phase;
  };
  std::vector<Mode> modes;
  CounterRng rng(seed, 0x6d656469756dULL);
  double total = 0;
  for (int p = -kmax; p <= kmax; ++p)
    for (int q = (dim == 2 ? -kmax : 0); q <= (dim == 2 ? kmax : 0); ++q) {
      // Half-plane of wavevectors; cosines cover the rest.
      if (p < 0 || (p == 0 && q <= 0)) continue;
      if (p * p + q * q > kmax * kmax) continue;
      const double amp = rng.normal(), phase = 2 * pi * rng.uniform();
      modes.push_back({2 * pi * p / box, 2 * pi * q / box, amp, phase});
      total += std::abs(amp);
    }
  if (total > 0)
    for (auto& m : modes) m.amp *= contrast / total;
  ScalarField n(
      [modes](const Eigen::Vector2d& x, Eigen::Vector2d* g) {
        double v = 1.0;
        Eigen::Vector2d gr = Eigen::Vector2d::Zero();
        for (const auto& m : modes) {
          const double arg = m.k0 * x[0] + m.k1 * x[1] + m.phase;
          v += m.amp * std::cos(arg);
          const double s = -m.amp * std::sin(arg);
          gr[0] += s * m.k0;
          gr[1] += s * m.k1;
        }
        if (g) *g = gr;
        return v;
      },
      1.0 - contrast, 1.0 + contrast);
  return Medium(dim, n, ScalarField::constant(a0),
                {{"preset", "random-smooth"},
                 {"dim", dim},
                 {"seed", seed},
                 {"contrast", contrast},
                 {"box", box},
                 {"kmax", kmax},
                 {"a0", a0}},
                box);
}

Medium Medium::from_grid(const Grid& g, const Eigen::VectorXd& n, const Eigen::VectorXd& a) {
  if (!n.allFinite() || !a.allFinite()) throw NumericalError("medium grid samples must be finite");
  if (n.minCoeff() <= 0) throw InvalidArgument("medium grid: n must be positive");
  if (a.minCoeff() < 0) throw InvalidArgument("medium grid: a must be nonnegative");
  auto sn = std::make_shared<PeriodicSpline>(g, n);
  auto sa = std::make_shared<PeriodicSpline>(g, a);
  // Spline overshoot is bounded by the sample range up to a small factor;
  // bounds use the samples and positivity is checked at evaluation.
  const bool a_const = a.maxCoeff() == a.minCoeff();
  ScalarField fn(
      [sn](const Eigen::Vector2d& x, Eigen::Vector2d* gr) {
        const double v = sn->eval(x, gr);
        if (!(v > 0)) throw NumericalError("medium spline: n <= 0");
        return v;
      },
      n.minCoeff(), n.maxCoeff());
  ScalarField fa = a_const ? ScalarField::constant(a(0))
                           : ScalarField([sa](const Eigen::Vector2d& x,
                                              Eigen::Vector2d* gr) { return std::max(0.0, sa->eval(x, gr)); },
                                         a.minCoeff(), a.maxCoeff());
  return Medium(g.dim, fn, fa,
                {{"preset", "grid"}, {"dim", g.dim}, {"n", g.n}, {"length", g.length},
                 {"n_min", n.minCoeff()}, {"n_max", n.maxCoeff()}},
                g.length);
}

Medium Medium::from_json(const nlohmann::json& j) {
  std::string preset = j.at("preset").get<std::string>();
  const int dim = j.value("dim", 1);
  const double a0 = j.value("a0", 0.0);
  std::optional<double> period;
  if (j.contains("period")) period = j.at("period").get<double>();
  // "random-smooth(42)" carries the seed inline.
  std::optional<std::uint64_t> inline_seed;
  if (auto lp = preset.find('('); lp != std::string::npos && preset.back() == ')') {
    inline_seed = std::stoull(preset.substr(lp + 1, preset.size() - lp - 2));
    preset = preset.substr(0, lp);
  }
  Medium m = [&]() -> Medium {
    if (preset == "homogeneous") return homogeneous(dim, j.value("n0", 1.0), a0, period);
    if (preset == "linear")
      return linear(dim, j.value("n0", 1.0), j.value("slope", 0.3), j.value("axis", 0), a0);
    if (preset == "gaussian-lens") {
      Eigen::Vector2d c = Eigen::Vector2d::Zero();
      if (j.contains("center")) {
        const auto& cj = j.at("center");
        c[0] = cj.at(0).get<double>();
        if (cj.size() > 1) c[1] = cj.at(1).get<double>();
      }
      return gaussian_lens(dim, j.value("n0", 1.0), j.value("depth", 0.2), j.value("sigma", 1.0), c, a0);
    }
    if (preset == "random-smooth") {
      const std::uint64_t seed = inline_seed ? *inline_seed : j.at("seed").get<std::uint64_t>();
      return random_smooth(dim, seed, j.value("contrast", 0.1), j.value("box", 1.0), j.value("kmax", 4), a0);
    }
    if (preset == "grid") return load(j.at("file").get<std::string>());
    throw InvalidArgument("unknown medium preset '" + preset + "'");
  }();
  if (j.contains("attenuation")) {
    const auto& at = j.at("attenuation");
    const std::string kind = at.value("kind", "constant");
    if (kind == "gaussian") {
      Eigen::Vector2d c = Eigen::Vector2d::Zero();
      const auto& cj = at.at("center");
      c[0] = cj.at(0).get<double>();
      if (cj.size() > 1) c[1] = cj.at(1).get<double>();
      m = m.with_attenuation(ScalarField::gaussian(at.value("base", a0), at.at("amplitude").get<double>(), c,
                                                   at.at("width").get<double>()),
                             at);
    } else if (kind != "constant") {
      throw InvalidArgument("unknown attenuation kind '" + kind + "'");
    }
  }
  return m;
}

Medium Medium::with_attenuation(ScalarField a, const nlohmann::json& a_spec) const {
  nlohmann::json s = spec_;
  s["attenuation"] = a_spec;
  return Medium(dim_, n_, std::move(a), s, period_);
}

Medium Medium::load(const std::string& path) {
  const auto f = read_grid_file(path);
  if (f.header.value("kind", "") != "medium") throw InvalidArgument(path + ": not a medium file");
  const Grid g{f.header.at("dim").get<int>(), f.header.at("n").get<int>(), f.header.at("length").get<double>()};
  g.validate();
  const auto sz = static_cast<Eigen::Index>(g.size());
  if (f.data.size() != static_cast<std::size_t>(2 * sz)) throw InvalidArgument(path + ": medium payload size");
  const Eigen::Map<const Eigen::VectorXd> n(f.data.data(), sz), a(f.data.data() + sz, sz);
  return from_grid(g, n, a);
}

void Medium::save(const std::string& path, const Grid& g) const {
  const Eigen::VectorXd n = sample_n(g), a = sample_a(g);
  std::vector<double> data(n.data(), n.data() + n.size());
  data.insert(data.end(), a.data(), a.data() + a.size());
  write_grid_file(path,
                  {{"kind", "medium"}, {"dim", g.dim}, {"n", g.n}, {"length", g.length}, {"dtype", "float64"},
                   {"channels", {"n", "a"}}, {"shape", {2, g.size()}}},
                  data);
}

Eigen::VectorXd Medium::sample_n(const Grid& g) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(g.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = n(g.position(static_cast<std::size_t>(i)));
  return v;
}

Eigen::VectorXd Medium::sample_a(const Grid& g) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(g.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = a(g.position(static_cast<std::size_t>(i)));
  return v;
}

double attenuation_time(const Medium& m) {
  return m.inf_a() > 0 ? 2.0 / m.inf_a() : std::numeric_limits<double>::infinity();
}

}  // namespace semicorr
