#include "semicorr/semiclassical.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "semicorr/error.hpp"
#include "semicorr/phase_space.hpp"
#include "semicorr/wave_sim.hpp"

namespace semicorr {

using std::numbers::pi;

double PredictedSymbol::masked_fraction() const {
  const double total = static_cast<double>(pi_bar.values.size());
  return total > 0 ? static_cast<double>(masked) / total : 0.0;
}

namespace {

struct QuadPoint {
  Eigen::Vector2d x, xi;
  double w;  // quadrature weight times e^{-A}
};

struct RayQuad {
  std::vector<QuadPoint> pts;
  QuadPoint tail{};  // e^{-A_H} / a_H at the horizon end
  double xi_min = 0, xi_max = 0;  // range of |xi| along the ray
  bool open_tail = false;         // a = 0 at the horizon: tail dropped
};

double resolve_horizon(const Medium& m, double horizon, const char* what) {
  const double tatt = attenuation_time(m);
  if (horizon <= 0) {
    if (!std::isfinite(tatt))
      throw InvalidArgument(std::string(what) + ": a vanishes somewhere; an explicit horizon is required");
    return 8 * tatt;
  }
  if (std::isfinite(tatt) && horizon < 8 * tatt * (1 - 1e-12))
    throw InvalidArgument(std::string(what) + ": horizon must be at least 8 T_att");
  return horizon;
}

// Derivative of (x, xi, A) with respect to backward time s = -t.
void backward_field(const Medium& m, const Eigen::Vector2d& x, const Eigen::Vector2d& xi, Eigen::Vector2d& dx,
                    Eigen::Vector2d& dxi, double& da) {
  Eigen::Vector2d grad;
  const double n = m.n(x, &grad);
  const double sn = std::sqrt(n), r = xi.norm();
  dx = -sn * xi / r;
  dxi = grad * (r / (2 * sn));
  if (m.dim() == 1) {
    dx[1] = 0;
    dxi[1] = 0;
  }
  da = m.a(x);
}

RayQuad build_quadrature(const Medium& m, const PhasePoint& z0, double horizon, double dt) {
  const double r0 = z0.xi.norm();
  const Ray ray = flow(m, z0, -horizon, dt);
  RayQuad q;
  q.xi_min = q.xi_max = r0;
  static const double gl_x[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
  static const double gl_w[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
  q.pts.reserve(3 * ray.samples.size());

  struct Node {
    double s;
    Eigen::Vector2d x, xi, dx, dxi;
    double A, dA;
  };
  auto node = [&](const RaySample& smp) {
    Node nd{-smp.t, smp.z.x, smp.z.xi, {}, {}, smp.attenuation, 0};
    if (!(nd.xi.norm() > 1e-12 * r0)) throw NumericalError("backward ray reached xi = 0");
    backward_field(m, nd.x, nd.xi, nd.dx, nd.dxi, nd.dA);
    q.xi_min = std::min(q.xi_min, nd.xi.norm());
    q.xi_max = std::max(q.xi_max, nd.xi.norm());
    return nd;
  };
  Node prev = node(ray.samples.front());
  for (std::size_t k = 1; k < ray.samples.size(); ++k) {
    const Node cur = node(ray.samples[k]);
    const double hs = cur.s - prev.s;
    for (int g = 0; g < 3; ++g) {
      const double t = gl_x[g], t2 = t * t, t3 = t2 * t;
      const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t, h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
      QuadPoint p;
      p.x = h00 * prev.x + h10 * hs * prev.dx + h01 * cur.x + h11 * hs * cur.dx;
      p.xi = h00 * prev.xi + h10 * hs * prev.dxi + h01 * cur.xi + h11 * hs * cur.dxi;
      const double A = h00 * prev.A + h10 * hs * prev.dA + h01 * cur.A + h11 * hs * cur.dA;
      p.w = gl_w[g] * hs * std::exp(-A);
      q.pts.push_back(p);
    }
    prev = cur;
  }
  q.tail.x = prev.x;
  q.tail.xi = prev.xi;
  if (prev.dA > 0) {
    q.tail.w = std::exp(-prev.A) / prev.dA;
  } else {
    q.tail.w = 0;
    q.open_tail = true;
  }
  return q;
}

double integrate(const RayQuad& q, const PowerSpectrum& p, double scale) {
  double acc = 0;
  for (const auto& pt : q.pts)
    if (pt.w > 0) acc += pt.w * p(pt.x, scale * pt.xi);
  if (q.tail.w > 0) acc += q.tail.w * p(q.tail.x, scale * q.tail.xi);
  return acc;
}

double default_ray_dt(const Medium& m, const Grid* g) {
  if (g) return g->h() / std::sqrt(m.sup_n());
  return 0.01;
}

}  // namespace

double backward_exposure(const Medium& m, const PowerSpectrum& p, const PhasePoint& z0, const ExposureOptions& opt) {
  const double horizon = resolve_horizon(m, opt.horizon, "backward_exposure");
  const double dt = opt.dt > 0 ? opt.dt : default_ray_dt(m, nullptr);
  if (!(z0.xi.norm() > 0)) throw NumericalError("backward_exposure: xi = 0 is singular");
  return integrate(build_quadrature(m, z0, horizon, dt), p, 1.0);
}

PredictedSymbol pi_bar(const Medium& m, const NoiseModel& nm, const PiBarOptions& opt) {
  const PhaseSpaceContext& ctx = nm.context();
  const Grid& g = ctx.grid;
  if (g.dim != m.dim()) throw ContextMismatch("pi_bar: medium and grid dimensions differ");
  PredictedSymbol out;
  out.horizon = resolve_horizon(m, opt.horizon, "pi_bar");
  out.ray_dt = opt.dt > 0 ? opt.dt : default_ray_dt(m, &g);
  out.medium = m.spec();
  out.noise = nm.spectrum().spec();
  const auto sz = static_cast<Eigen::Index>(ctx.size());
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(sz, sz);
  const PowerSpectrum& p = nm.spectrum();

  // Smallest nonzero |xi| on the grid.
  const double dxi = ctx.dxi();
  out.l0_floor = opt.l0_floor > 0 ? opt.l0_floor : 0.5 * dxi * std::sqrt(m.inf_n());

  // Group xi slots by direction so each (x, direction) needs one ray.
  std::map<std::pair<long long, long long>, std::vector<std::pair<Eigen::Index, double>>> dirs;
  for (Eigen::Index s = 0; s < sz; ++s) {
    const Eigen::Vector2d xi = ctx.xi_vector(static_cast<std::size_t>(s));
    const double r = xi.norm();
    if (r == 0) continue;
    const Eigen::Vector2d u = xi / r;
    const auto key = std::make_pair(std::llround(u[0] * 1e12), std::llround(u[1] * 1e12));
    dirs[key].push_back({s, r});
  }
  if (!p.is_zero()) {
    for (Eigen::Index j = 0; j < sz; ++j) {
      const Eigen::Vector2d x = g.position(static_cast<std::size_t>(j));
      const double n = m.n(x);
      for (const auto& [key, slots] : dirs) {
        // Skip rays whose whole |xi| band misses the support.
        bool any = false;
        const Eigen::Vector2d u(static_cast<double>(key.first) * 1e-12, static_cast<double>(key.second) * 1e-12);
        for (const auto& [s, r] : slots) any = any || (std::sqrt(n) * r >= out.l0_floor);
        if (!any) continue;
        const RayQuad q = build_quadrature(m, PhasePoint{x, u.normalized()}, out.horizon, out.ray_dt);
        if (q.open_tail && out.warnings.empty()) out.warnings.push_back("a = 0 at a ray end: tail beyond horizon dropped");
        for (const auto& [s, r] : slots) {
          const double l0 = std::sqrt(n) * r;
          if (l0 < out.l0_floor) continue;
          if (r * q.xi_max < p.xi_min() || r * q.xi_min > p.xi_max()) continue;
          values(j, s) = ctx.epsilon * ctx.epsilon / (4 * l0 * l0) * integrate(q, p, r);
        }
      }
    }
  }
  // Masked nodes: l0 below the floor (always includes xi = 0).
  for (Eigen::Index s = 0; s < sz; ++s) {
    const double r = ctx.xi_vector(static_cast<std::size_t>(s)).norm();
    for (Eigen::Index j = 0; j < sz; ++j)
      if (std::sqrt(m.n(g.position(static_cast<std::size_t>(j)))) * r < out.l0_floor) ++out.masked;
  }
  out.pi_bar = Symbol(ctx, values.cast<cplx>());
  if (out.masked_fraction() > opt.mask_warning)
    out.warnings.push_back("pi_bar: " + std::to_string(100 * out.masked_fraction()) +
                           "% of phase-space nodes masked (xi grid too close to 0)");
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Trigonometric interpolation weights phi with f(x) = sum_j phi_j f_j.
Eigen::VectorXd interpolation_weights(const Grid& g, double x) {
  Eigen::VectorXd w(g.n);
  for (int j = 0; j < g.n; ++j) {
    Eigen::Vector2d d = g.wrap_delta(Eigen::Vector2d(g.coord(j), 0), Eigen::Vector2d(x, 0));
    if (std::abs(d[0]) < 1e-12 * g.h()) {
      w.setZero();
      w(j) = 1;
      return w;
    }
    double acc = 1;
    for (int m = 1; m < g.n / 2; ++m) acc += 2 * std::cos(2 * pi * m * d[0] / g.length);
    acc += std::cos(pi * g.n * d[0] / g.length);
    w(j) = acc / g.n;
  }
  return w;
}

struct ModalPredictor {
  // C(tau) = Re sum_i [ra(i) e^{tau lm(i)} cm(i) + rp(i) e^{tau lp(i)} cp(i)] / h
  Eigen::VectorXcd ra, cm, rp, cp, lm, lp;
  double h = 1;

  double value(double tau, bool derivative) const {
    cplx acc = 0;
    for (Eigen::Index i = 0; i < lm.size(); ++i) {
      const cplx em = std::exp(tau * lm(i)), ep = std::exp(tau * lp(i));
      cplx tm = ra(i) * em * cm(i), tp = rp(i) * ep * cp(i);
      if (derivative) {
        tm *= lm(i);
        tp *= lp(i);
      }
      acc += tm + tp;
    }
    return acc.real() / h;
  }
};

struct PredictorSet {
  ModalPredictor ab, ba;
  bool expm_fallback = false;
  Eigen::MatrixXcd gen_minus, pi, pi_check;
  Eigen::VectorXd wa, wb;
  double h = 1;
  PairingMode pairing = PairingMode::Corrected;

  double value(bool forward, double tau, bool derivative) const {
    if (!expm_fallback) return (forward ? ab : ba).value(tau, derivative);
    const Eigen::MatrixXcd om = (tau * gen_minus).exp();
    const Eigen::MatrixXcd op = om.conjugate();
    const Eigen::MatrixXcd& second = pairing == PairingMode::Corrected ? pi_check : pi;
    Eigen::MatrixXcd c;
    if (derivative)
      c = gen_minus * om * pi + gen_minus.conjugate() * op * second;
    else
      c = om * pi + op * second;
    const Eigen::VectorXd& x = forward ? wa : wb;
    const Eigen::VectorXd& y = forward ? wb : wa;
    return (x.cast<cplx>().transpose() * c * y.cast<cplx>()).value().real() / h;
  }
};

PredictorSet build_predictor(const Medium& m, const PredictedSymbol& pb, const Eigen::Vector2d& a,
                             const Eigen::Vector2d& b, PairingMode pairing) {
  const PhaseSpaceContext& ctx = pb.pi_bar.ctx;
  const Grid& g = ctx.grid;
  if (g.dim != 1) throw InvalidArgument("predict_correlation: 1-D only");
  if (g.n > kMaxDenseN1) throw SizeLimit("predict_correlation: N must be <= 512");
  HalfWaveBasis basis(m, g);
  PredictorSet ps;
  ps.pairing = pairing;
  ps.h = g.h();
  ps.pi = weyl_matrix(pb.pi_bar);
  ps.pi_check = weyl_matrix(reflect_xi(pb.pi_bar));
  ps.wa = interpolation_weights(g, a[0]);
  ps.wb = interpolation_weights(g, b[0]);
  const Eigen::MatrixXcd& second = pairing == PairingMode::Corrected ? ps.pi_check : ps.pi;

  Eigen::MatrixXcd w, winv;
  Eigen::VectorXcd lam;
  if (basis.constant_attenuation()) {
    w = basis.eigenvectors().cast<cplx>();
    winv = w.transpose();
    lam.resize(basis.eigenvalues().size());
    for (Eigen::Index i = 0; i < lam.size(); ++i)
      lam(i) = cplx(-0.5 * basis.a0(), -std::sqrt(basis.eigenvalues()(i)));
  } else {
    ps.gen_minus = cplx(0, -1) * basis.sqrt_operator().cast<cplx>();
    ps.gen_minus.diagonal() -= (0.5 * basis.attenuation()).cast<cplx>();
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(ps.gen_minus);
    bool ok = es.info() == Eigen::Success;
    if (ok) {
      w = es.eigenvectors();
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(w);
      const auto& sv = svd.singularValues();
      ok = sv(sv.size() - 1) > 1e-10 * sv(0);
      if (ok) {
        winv = w.inverse();
        lam = es.eigenvalues();
      }
    }
    if (!ok) {
      ps.expm_fallback = true;
      return ps;
    }
  }
  auto make = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    ModalPredictor mp;
    mp.h = g.h();
    const Eigen::VectorXcd xc = x.cast<cplx>(), yc = y.cast<cplx>();
    mp.ra = w.transpose() * xc;
    mp.cm = winv * (ps.pi * yc);
    mp.rp = w.conjugate().transpose() * xc;
    mp.cp = winv.conjugate() * (second * yc);
    mp.lm = lam;
    mp.lp = lam.conjugate();
    return mp;
  };
  ps.ab = make(ps.wa, ps.wb);
  ps.ba = make(ps.wb, ps.wa);
  return ps;
}

}  // namespace

Eigen::VectorXd predict_correlation_at(const Medium& m, const PredictedSymbol& pb, const Eigen::Vector2d& a,
                                       const Eigen::Vector2d& b, const std::vector<double>& taus,
                                       const PredictOptions& opt) {
  for (double t : taus)
    if (!(t > 0)) throw InvalidArgument("predict_correlation: lags must be positive");
  const PredictorSet ps = build_predictor(m, pb, a, b, opt.pairing);
  Eigen::VectorXd out(static_cast<Eigen::Index>(taus.size()));
  for (std::size_t i = 0; i < taus.size(); ++i) out(static_cast<Eigen::Index>(i)) = ps.value(true, taus[i], opt.derivative);
  return out;
}

CorrelationRecord predict_correlation(const Medium& m, const PredictedSymbol& pb, const Eigen::Vector2d& a,
                                      const Eigen::Vector2d& b, double tau_max, double dtau,
                                      const PredictOptions& opt) {
  if (!(tau_max > 0) || !(dtau > 0)) throw InvalidArgument("predict_correlation: tau_max and dtau must be positive");
  const PredictorSet ps = build_predictor(m, pb, a, b, opt.pairing);
  const long J = std::lround(tau_max / dtau);
  CorrelationRecord rec;
  rec.provenance = Provenance::Semiclassical;
  rec.a = a;
  rec.b = b;
  rec.dtau = dtau;
  rec.window = pb.horizon;
  rec.warnings = pb.warnings;
  if (ps.expm_fallback) rec.warnings.push_back("generator eigenbasis ill-conditioned: used matrix exponentials");
  rec.values.resize(2 * J + 1);
  for (long l = -J; l <= J; ++l) {
    const double t = std::abs(static_cast<double>(l) * dtau);
    // C_AB(-t) = C_BA(t); the derivative flips sign with the lag.
    if (l >= 0)
      rec.values(l + J) = ps.value(true, t, opt.derivative);
    else
      rec.values(l + J) = (opt.derivative ? -1.0 : 1.0) * ps.value(false, t, opt.derivative);
  }
  return rec;
}

// ---------------------------------------------------------------------------

RayContribution m_gamma(const Ray& ray, const NoiseModel& nm, const Medium& m, const ExposureOptions& opt,
                        double xi_norm) {
  if (ray.samples.empty()) throw InvalidArgument("m_gamma: empty ray");
  PhasePoint z0 = ray.start().z;
  if (!(z0.xi.norm() > 0)) throw NumericalError("m_gamma: launch covector is zero");
  if (xi_norm > 0) z0.xi *= xi_norm / z0.xi.norm();
  RayContribution rc;
  rc.horizon = resolve_horizon(m, opt.horizon, "m_gamma");
  const double dt = opt.dt > 0 ? opt.dt : default_ray_dt(m, &nm.context().grid);
  const RayQuad q = build_quadrature(m, z0, rc.horizon, dt);
  rc.m_gamma = -0.5 * integrate(q, nm.spectrum(), 1.0);
  rc.ray = flow(m, z0, -rc.horizon, dt);
  return rc;
}

AsymmetryFactor asymmetry_factor(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double tau, const Medium& m,
                                 const NoiseModel& nm, const AsymmetryOptions& opt) {
  const auto from_b = shoot(m, b, a, tau, opt.shoot);
  const auto from_a = shoot(m, a, b, tau, opt.shoot);
  if (from_b.size() != 1 || from_a.size() != 1)
    throw InvalidArgument("asymmetry_factor: need exactly one connecting ray each way (found " +
                          std::to_string(from_b.size()) + " and " + std::to_string(from_a.size()) + ")");
  double xi_norm = opt.xi_norm;
  const PowerSpectrum& p = nm.spectrum();
  if (xi_norm <= 0) xi_norm = std::isfinite(p.xi_max()) && p.xi_max() > 0 ? 0.5 * (p.xi_min() + p.xi_max()) : 1.0;
  AsymmetryFactor k;
  k.m_ba = m_gamma(from_b[0], nm, m, opt.exposure, xi_norm).m_gamma;
  k.m_ab = m_gamma(from_a[0], nm, m, opt.exposure, xi_norm).m_gamma;
  if (k.m_ba == 0) {
    k.one_sided = true;
    k.k = std::numeric_limits<double>::quiet_NaN();
    k.notes.push_back("no source exposure behind B: k undefined");
  } else {
    k.k = k.m_ab / k.m_ba;
  }
  k.notes.push_back("|xi| = " + std::to_string(xi_norm));
  return k;
}

double empirical_asymmetry(const CorrelationRecord& rec, double lo, double hi) {
  double num = 0, den = 0;
  for (long l = 1; l <= rec.half_width(); ++l) {
    const double t = rec.tau(l);
    if (t < lo || t > hi) continue;
    num += rec.at(-l) * rec.at(l);
    den += rec.at(l) * rec.at(l);
  }
  if (den == 0) throw InvalidArgument("empirical_asymmetry: C(tau) vanishes on the window");
  return num / den;
}

}  // namespace semicorr
