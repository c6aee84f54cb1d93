#include "semicorr/rays.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include <boost/math/tools/minima.hpp>

#include "semicorr/error.hpp"
#include "semicorr/grid_io.hpp"

namespace semicorr {

namespace {

using State = std::array<double, 5>;  // x0, x1, xi0, xi1, A

State rhs(const Medium& m, const State& y, double dir) {
  const Eigen::Vector2d x(y[0], y[1]);
  Eigen::Vector2d g;
  const double n = m.n(x, &g);
  const double s = std::sqrt(n);
  const double k = std::hypot(y[2], y[3]);
  if (!(k > 0)) throw NumericalError("ray flow reached xi = 0");
  State d{};
  d[0] = dir * s * y[2] / k;
  d[1] = dir * s * y[3] / k;
  d[2] = -dir * k * g[0] / (2 * s);
  d[3] = -dir * k * g[1] / (2 * s);
  d[4] = m.a(x);  // A accumulates |t|
  if (m.dim() == 1) d[1] = d[3] = 0.0;
  return d;
}

State rk4(const Medium& m, const State& y, double h, double dir) {
  auto axpy = [](const State& a, double s, const State& b) {
    State r;
    for (int i = 0; i < 5; ++i) r[i] = a[i] + s * b[i];
    return r;
  };
  const State k1 = rhs(m, y, dir);
  const State k2 = rhs(m, axpy(y, h / 2, k1), dir);
  const State k3 = rhs(m, axpy(y, h / 2, k2), dir);
  const State k4 = rhs(m, axpy(y, h, k3), dir);
  State r;
  for (int i = 0; i < 5; ++i) r[i] = y[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  return r;
}

double ham(const Medium& m, const State& y) {
  return std::sqrt(m.n(Eigen::Vector2d(y[0], y[1]))) * std::hypot(y[2], y[3]);
}

// One step of size h, retried with halved substeps while H drifts too much.
State guarded_step(const Medium& m, const State& y, double h, double dir, double h0, const FlowOptions& opt,
                   int depth = 0) {
  const State r = rk4(m, y, h, dir);
  const double drift = std::abs(ham(m, r) - ham(m, y)) / h0;
  if (drift <= opt.h_tolerance) return r;
  if (depth >= opt.max_halvings)
    throw NumericalError("ray flow: Hamiltonian drift " + std::to_string(drift) + " exceeds tolerance");
  const State mid = guarded_step(m, y, h / 2, dir, h0, opt, depth + 1);
  return guarded_step(m, mid, h / 2, dir, h0, opt, depth + 1);
}

RaySample to_sample(double t, const State& y) {
  RaySample s;
  s.t = t;
  s.z.x = Eigen::Vector2d(y[0], y[1]);
  s.z.xi = Eigen::Vector2d(y[2], y[3]);
  s.attenuation = y[4];
  return s;
}

}  // namespace

double Ray::launch_angle() const { return std::atan2(start().z.xi[1], start().z.xi[0]); }

double hamiltonian(const Medium& m, const PhasePoint& z) { return std::sqrt(m.n(z.x)) * z.xi.norm(); }

Ray flow(const Medium& m, const PhasePoint& z0, double t, double dt, const FlowOptions& opt) {
  if (!(dt > 0)) throw InvalidArgument("flow: dt must be positive");
  if (!std::isfinite(t)) throw InvalidArgument("flow: t must be finite");
  PhasePoint z = z0;
  if (m.dim() == 1) {
    z.x[1] = 0;
    z.xi[1] = 0;
  }
  if (!(z.xi.norm() > 0)) throw InvalidArgument("flow: |xi| must be positive");
  Ray ray;
  ray.dim = m.dim();
  ray.hamiltonian = hamiltonian(m, z);
  State y{z.x[0], z.x[1], z.xi[0], z.xi[1], 0.0};
  ray.samples.push_back(to_sample(0.0, y));
  const double dir = t < 0 ? -1.0 : 1.0;
  const double total = std::abs(t);
  const auto steps = static_cast<long>(std::ceil(total / dt - 1e-12));
  double done = 0;
  for (long i = 0; i < steps; ++i) {
    const double h = (i == steps - 1) ? total - done : dt;
    y = guarded_step(m, y, h, dir, ray.hamiltonian, opt);
    done = (i == steps - 1) ? total : done + dt;
    if (opt.record || i == steps - 1) ray.samples.push_back(to_sample(dir * done, y));
  }
  return ray;
}

void write_csv(const std::string& path, const Ray& ray) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path);
  out << "t,x0,x1,xi0,xi1,A\n";
  for (const auto& s : ray.samples)
    out << format_double(s.t) << ',' << format_double(s.z.x[0]) << ',' << format_double(s.z.x[1]) << ','
        << format_double(s.z.xi[0]) << ',' << format_double(s.z.xi[1]) << ',' << format_double(s.attenuation)
        << '\n';
}

namespace {

PhasePoint unit_shell(const Medium& m, const Eigen::Vector2d& B, double theta) {
  PhasePoint z;
  z.x = B;
  const double k = 1.0 / std::sqrt(m.n(B));
  z.xi = Eigen::Vector2d(std::cos(theta), std::sin(theta)) * k;
  return z;
}

double endpoint_distance(const Medium& m, const Eigen::Vector2d& x, const Eigen::Vector2d& A) {
  Eigen::Vector2d d = x - A;
  if (m.dim() == 1) d[1] = 0;
  if (auto p = m.period())
    for (int k = 0; k < m.dim(); ++k) d[k] -= *p * std::floor(d[k] / *p + 0.5);
  return d.norm();
}

}  // namespace

std::vector<Ray> shoot(const Medium& m, const Eigen::Vector2d& B, const Eigen::Vector2d& A, double tau,
                       const ShootOptions& opt) {
  if (!(tau > 0)) throw InvalidArgument("shoot: tau must be positive");
  const double tol = opt.tol_shoot > 0 ? opt.tol_shoot : 1e-6 * opt.domain_size;
  FlowOptions quick;
  quick.record = false;
  auto end_at = [&](double theta, double dt) { return flow(m, unit_shell(m, B, theta), tau, dt, quick).end(); };

  std::vector<double> angles;
  if (m.dim() == 1) {
    for (double th : {0.0, std::numbers::pi})
      if (endpoint_distance(m, end_at(th, opt.dt).z.x, A) < tol) angles.push_back(th);
  } else {
    const int nl = std::max(opt.n_launch, 8);
    std::vector<double> th(nl), d(nl);
    for (int i = 0; i < nl; ++i) {
      th[i] = 2 * std::numbers::pi * i / nl;
      d[i] = endpoint_distance(m, end_at(th[i], opt.dt).z.x, A);
    }
    for (int i = 0; i < nl; ++i) {
      const int ip = (i + nl - 1) % nl, in = (i + 1) % nl;
      if (!(d[i] <= d[ip] && d[i] < d[in])) continue;
      const double lo = th[i] - 2 * std::numbers::pi / nl, hi = th[i] + 2 * std::numbers::pi / nl;
      auto f = [&](double t) {
        const double e = endpoint_distance(m, end_at(t, opt.dt).z.x, A);
        return e * e;
      };
      std::uintmax_t iters = 200;
      const auto best = boost::math::tools::brent_find_minima(f, lo, hi, 52, iters);
      if (std::sqrt(best.second) < tol) {
        double a = std::remainder(best.first, 2 * std::numbers::pi);
        angles.push_back(a);
      }
    }
  }

  std::sort(angles.begin(), angles.end());
  std::vector<double> unique;
  for (double a : angles) {
    bool dup = false;
    for (double u : unique) {
      const double diff = std::abs(std::remainder(a - u, 2 * std::numbers::pi));
      if (diff < opt.dedup_angle) dup = true;
    }
    if (!dup) unique.push_back(a);
  }

  std::vector<Ray> rays;
  for (double a : unique) {
    // Independent re-integration at a finer step.
    if (endpoint_distance(m, end_at(a, opt.dt / 10).z.x, A) >= tol) continue;
    rays.push_back(flow(m, unit_shell(m, B, a), tau, opt.dt));
  }
  return rays;
}

namespace {

using Vec4 = Eigen::Vector4d;

Vec4 field(const Medium& m, const Vec4& z) {
  State y{z[0], z[1], z[2], z[3], 0.0};
  const State d = rhs(m, y, 1.0);
  return Vec4(d[0], d[1], d[2], d[3]);
}

// Directional derivative of the Hamiltonian field, central differences.
Vec4 tangent(const Medium& m, const Vec4& z, const Vec4& v) {
  const double nv = v.norm();
  if (nv == 0) return Vec4::Zero();
  const double delta = 1e-6 * std::max(1.0, z.norm()) / nv;
  return (field(m, z + delta * v) - field(m, z - delta * v)) / (2 * delta);
}

}  // namespace

TimeScales lyapunov(const Medium& m, const PhasePoint& z0, double T, const LyapunovOptions& opt) {
  if (!(T > 0) || !(opt.dt > 0) || !(opt.renorm_interval >= opt.dt))
    throw InvalidArgument("lyapunov: need T > 0 and renorm_interval >= dt > 0");
  if (T < 10 * opt.renorm_interval) throw InvalidArgument("lyapunov: horizon must cover >= 10 renormalizations");
  TimeScales out;
  out.t_att = attenuation_time(m);
  Vec4 z(z0.x[0], z0.x[1], z0.xi[0], z0.xi[1]);
  if (m.dim() == 1) z[1] = z[3] = 0;
  if (!(Eigen::Vector2d(z[2], z[3]).norm() > 0)) throw InvalidArgument("lyapunov: |xi| must be positive");
  Vec4 v = Vec4::Zero();
  if (m.dim() == 1) {
    v[0] = 1;
  } else {
    const Vec4 f = field(m, z);
    const Eigen::Vector2d vel(f[0], f[1]);
    v[0] = -vel[1];
    v[1] = vel[0];
    v /= v.norm();
  }
  const auto steps_per = static_cast<long>(std::lround(opt.renorm_interval / opt.dt));
  const double h = opt.renorm_interval / static_cast<double>(steps_per);
  const auto blocks = static_cast<long>(std::floor(T / opt.renorm_interval + 1e-9));
  double log_sum = 0;
  for (long b = 0; b < blocks; ++b) {
    for (long s = 0; s < steps_per; ++s) {
      const Vec4 k1 = field(m, z), l1 = tangent(m, z, v);
      const Vec4 z2 = z + h / 2 * k1, v2 = v + h / 2 * l1;
      const Vec4 k2 = field(m, z2), l2 = tangent(m, z2, v2);
      const Vec4 z3 = z + h / 2 * k2, v3 = v + h / 2 * l2;
      const Vec4 k3 = field(m, z3), l3 = tangent(m, z3, v3);
      const Vec4 z4 = z + h * k3, v4 = v + h * l3;
      const Vec4 k4 = field(m, z4), l4 = tangent(m, z4, v4);
      z += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      v += h / 6 * (l1 + 2 * l2 + 2 * l3 + l4);
    }
    const double r = v.norm();
    if (!(r > 0) || !std::isfinite(r)) throw NumericalError("lyapunov: tangent vector degenerated");
    log_sum += std::log(r);
    v /= r;
    out.running.push_back(log_sum / ((b + 1) * opt.renorm_interval));
  }
  out.lyapunov = out.running.back();
  out.t_lyap = out.lyapunov > 0 ? 1.0 / out.lyapunov : std::numeric_limits<double>::infinity();
  const std::size_t half = out.running.size() / 2;
  const auto [mn, mx] = std::minmax_element(out.running.begin() + static_cast<long>(half), out.running.end());
  const double spread = *mx - *mn;
  out.converged = spread <= opt.fluctuation_limit * std::abs(out.lyapunov) || spread <= 1e-9;
  return out;
}

}  // namespace semicorr
