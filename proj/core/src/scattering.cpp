#include "semicorr/scattering.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>

#include <Eigen/SparseLU>

#include "semicorr/error.hpp"

namespace semicorr {

using std::numbers::pi;

namespace {

constexpr cplxd kI(0, 1);

cplxd hankel1(int m, double x) { return {std::cyl_bessel_j(m, x), std::cyl_neumann(m, x)}; }

double bessel_j(int m, double x) {
  // std::cyl_bessel_j rejects negative orders.
  const double v = std::cyl_bessel_j(std::abs(m), x);
  return (m < 0 && (m % 2)) ? -v : v;
}

}  // namespace

HelmholtzSetup HelmholtzSetup::free_space(double n0, double omega, double length, int cells, double layer) {
  HelmholtzSetup s;
  s.n0 = n0;
  s.omega = omega;
  s.length = length;
  s.cells = cells;
  s.layer = layer;
  s.spec = {{"kind", "free-space"}, {"n0", n0},       {"omega", omega},
            {"length", length},     {"cells", cells}, {"layer", layer}};
  s.validate();
  return s;
}

HelmholtzSetup HelmholtzSetup::disk(double n0, double n_inside, double radius, const Eigen::Vector2d& center,
                                    double omega, double length, int cells, double layer) {
  if (!(n_inside > 0) || !(radius > 0)) throw InvalidArgument("disk scatterer: n_inside and radius must be positive");
  HelmholtzSetup s = free_space(n0, omega, length, cells, layer);
  s.n = [=](const Eigen::Vector2d& x) { return (x - center).norm() < radius ? n_inside : n0; };
  s.support_center = center;
  s.support_radius = radius;
  s.sharp_boundary = true;
  s.spec["kind"] = "disk";
  s.spec["n_inside"] = n_inside;
  s.spec["radius"] = radius;
  s.spec["center"] = {center[0], center[1]};
  s.validate();
  return s;
}

void HelmholtzSetup::validate() const {
  if (!(n0 > 0) || !(omega > 0) || !(length > 0) || !(layer > 0) || cells < 8)
    throw InvalidArgument("helmholtz setup: n0, omega, length, layer must be positive and cells >= 8");
  // Points per wavelength with the slowest n on the perturbation.
  double n_min = n0;
  if (n && support_radius > 0)
    for (int i = 0; i < 64; ++i)
      for (int r = 0; r <= 8; ++r) {
        const double th = 2 * pi * i / 64, rr = support_radius * r / 8.0;
        n_min = std::min(n_min, n(support_center + rr * Eigen::Vector2d(std::cos(th), std::sin(th))));
      }
  if (!(n_min > 0)) throw InvalidArgument("helmholtz setup: n must be positive");
  const double wavelength = 2 * pi * std::sqrt(n_min) / omega;
  if (wavelength / h() < 12)
    throw InvalidArgument("helmholtz setup: fewer than 12 grid points per wavelength (" +
                          std::to_string(wavelength / h()) + ")");
  if (layer < 2 * pi * std::sqrt(n0) / omega) throw InvalidArgument("helmholtz setup: layer thinner than a wavelength");
  const double inner = 0.5 * length - layer;
  if (support_radius > 0 && (support_center.cwiseAbs().maxCoeff() + support_radius + 2 * h() >= inner))
    throw InvalidArgument("helmholtz setup: perturbation must sit inside the box, clear of the layer");
  if (inner <= 0) throw InvalidArgument("helmholtz setup: layer leaves no interior");
}

cplxd free_space_green(const HelmholtzSetup& s, const Eigen::Vector2d& x, const Eigen::Vector2d& y) {
  const double r = (x - y).norm();
  if (r == 0) throw InvalidArgument("free_space_green: x = y is singular");
  return -kI / (4 * s.n0) * hankel1(0, s.k() * r);
}

// ---------------------------------------------------------------------------

struct HelmholtzSolver::Factor {
  Eigen::SparseLU<Eigen::SparseMatrix<cplxd>, Eigen::COLAMDOrdering<int>> lu;
  std::once_flag once;
  bool ok = false;
};

HelmholtzSolver::HelmholtzSolver(const HelmholtzSetup& s) : setup_(s), lu_(std::make_unique<Factor>()) {
  setup_.validate();
  const int M = nodes_per_axis();
  const double h = setup_.h(), L = setup_.length, w = setup_.omega;
  const double inner = 0.5 * L - setup_.layer;
  const double smax =
      setup_.layer_strength > 0 ? setup_.layer_strength : 1.5 * std::log(1e8) * std::sqrt(setup_.n0) / setup_.layer;
  auto stretch = [&](double t) {
    const double d = std::max(0.0, std::abs(t) - inner) / setup_.layer;
    return cplxd(1, smax * d * d / w);
  };
  auto coord = [&](double i) { return -0.5 * L + (i + 1) * h; };
  // n averaged over an h x h square (4 x 4 midpoints).
  auto cell_mean = [&](const Eigen::Vector2d& c) {
    if (!setup_.n) return setup_.n0;
    double acc = 0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) acc += setup_.n(c + h * Eigen::Vector2d((a + 0.5) / 4 - 0.5, (b + 0.5) / 4 - 0.5));
    return acc / 16;
  };
  std::vector<Eigen::Triplet<cplxd>> ta, tq;
  ta.reserve(5 * static_cast<std::size_t>(M) * M);
  const double h2 = h * h;
  for (int j = 0; j < M; ++j)
    for (int i = 0; i < M; ++i) {
      const Eigen::Index p = index(i, j);
      const double x = coord(i), y = coord(j);
      const cplxd sx = stretch(x), sy = stretch(y);
      cplxd diag = w * w * sx * sy;
      cplxd qdiag = 0;
      // Faces: (di, dj) neighbours; the box edge is Dirichlet.
      const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int f = 0; f < 4; ++f) {
        const double fx = x + 0.5 * di[f] * h, fy = y + 0.5 * dj[f] * h;
        const double nf = cell_mean(Eigen::Vector2d(fx, fy));
        const cplxd pml = di[f] != 0 ? stretch(y) / stretch(fx) : stretch(x) / stretch(fy);
        const cplxd c = nf * pml / h2;
        diag -= c;
        const int ni = i + di[f], nj = j + dj[f];
        const bool inside = ni >= 0 && ni < M && nj >= 0 && nj < M;
        if (inside) ta.emplace_back(p, index(ni, nj), c);
        const double qf = nf - setup_.n0;
        if (qf != 0) {
          // Q = -div_h(q grad_h); no layer factors (q vanishes there).
          qdiag += qf / h2;
          if (inside) tq.emplace_back(p, index(ni, nj), -qf / h2);
        }
      }
      ta.emplace_back(p, p, diag);
      if (qdiag != 0.0) tq.emplace_back(p, p, qdiag);
    }
  const Eigen::Index n = static_cast<Eigen::Index>(M) * M;
  a_.resize(n, n);
  a_.setFromTriplets(ta.begin(), ta.end());
  q_.resize(n, n);
  q_.setFromTriplets(tq.begin(), tq.end());
}

HelmholtzSolver::~HelmholtzSolver() = default;

Eigen::Vector2d HelmholtzSolver::node(int i, int j) const {
  const double h = setup_.h();
  return {-0.5 * setup_.length + (i + 1) * h, -0.5 * setup_.length + (j + 1) * h};
}

Eigen::VectorXcd HelmholtzSolver::plane_wave(const Eigen::Vector2d& khat) const {
  const int M = nodes_per_axis();
  const double k = setup_.k();
  Eigen::VectorXcd e(static_cast<Eigen::Index>(M) * M);
  for (int j = 0; j < M; ++j)
    for (int i = 0; i < M; ++i) e(index(i, j)) = std::exp(kI * k * khat.dot(node(i, j)));
  return e;
}

Eigen::VectorXcd HelmholtzSolver::perturbation_source(const Eigen::VectorXcd& u) const { return q_ * u; }

Eigen::VectorXcd HelmholtzSolver::solve(const Eigen::VectorXcd& rhs) const {
  // Factor on first use (free-space runs never need it).
  std::call_once(lu_->once, [this] {
    lu_->lu.analyzePattern(a_);
    lu_->lu.factorize(a_);
    lu_->ok = lu_->lu.info() == Eigen::Success;
  });
  if (!lu_->ok) throw NumericalError("helmholtz: sparse LU factorization failed");
  Eigen::VectorXcd x = lu_->lu.solve(rhs);
  if (lu_->lu.info() != Eigen::Success) throw NumericalError("helmholtz: solve failed");
  const double bn = rhs.norm();
  last_residual_ = bn > 0 ? (a_ * x - rhs).norm() / bn : 0.0;
  if (!(last_residual_ < 1e-8)) throw NumericalError("helmholtz: solve did not converge");
  return x;
}

Eigen::SparseVector<cplxd> HelmholtzSolver::interpolation(const Eigen::Vector2d& x) const {
  const int M = nodes_per_axis();
  const double h = setup_.h();
  const double fi = (x[0] + 0.5 * setup_.length) / h - 1, fj = (x[1] + 0.5 * setup_.length) / h - 1;
  const int i0 = static_cast<int>(std::floor(fi)), j0 = static_cast<int>(std::floor(fj));
  if (i0 < 0 || j0 < 0 || i0 + 1 >= M || j0 + 1 >= M) throw InvalidArgument("helmholtz: point outside the grid");
  const double tx = fi - i0, ty = fj - j0;
  Eigen::SparseVector<cplxd> r(static_cast<Eigen::Index>(M) * M);
  const double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
  const int oi[4] = {0, 1, 0, 1}, oj[4] = {0, 0, 1, 1};
  for (int c = 0; c < 4; ++c)
    if (w[c] != 0) r.coeffRef(index(i0 + oi[c], j0 + oj[c])) += w[c];
  return r;
}

Eigen::VectorXcd HelmholtzSolver::receiver_adjoint(const Eigen::Vector2d& x) const {
  const Eigen::VectorXcd r = Eigen::VectorXcd(interpolation(x));
  if (q_.nonZeros() == 0) return Eigen::VectorXcd::Zero(r.size());
  return solve(r);
}

Eigen::VectorXcd HelmholtzSolver::far_field(const Eigen::VectorXcd& total, const Eigen::VectorXd& angles) const {
  const Eigen::VectorXcd f = q_ * total;
  const double k = setup_.k(), h = setup_.h();
  const cplxd pre = -kI / (4 * setup_.n0) * std::sqrt(2 / (pi * k)) * std::exp(-kI * pi / 4.0) * (h * h);
  const int M = nodes_per_axis();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(angles.size());
  for (Eigen::Index a = 0; a < angles.size(); ++a) {
    const Eigen::Vector2d xh(std::cos(angles(a)), std::sin(angles(a)));
    cplxd acc = 0;
    for (int j = 0; j < M; ++j)
      for (int i = 0; i < M; ++i) {
        const cplxd v = f(index(i, j));
        if (v != 0.0) acc += std::exp(-kI * k * xh.dot(node(i, j))) * v;
      }
    out(a) = pre * acc;
  }
  return out;
}

// ---------------------------------------------------------------------------

ScatteringSolution solve_scattering(const HelmholtzSolver& solver, const Eigen::Vector2d& khat, int far_samples) {
  if (std::abs(khat.norm() - 1) > 1e-12) throw InvalidArgument("solve_scattering: khat must be a unit vector");
  ScatteringSolution s;
  s.khat = khat;
  s.cells = solver.setup().cells;
  s.length = solver.setup().length;
  const Eigen::VectorXcd e0 = solver.plane_wave(khat);
  const Eigen::VectorXcd src = solver.perturbation_source(e0);
  s.scattered = src.norm() > 0 ? solver.solve(src) : Eigen::VectorXcd::Zero(e0.size());
  s.total = e0 + s.scattered;
  s.far_angles = Eigen::VectorXd::LinSpaced(far_samples, 0, 2 * pi * (far_samples - 1) / far_samples);
  s.far_field = solver.far_field(s.total, s.far_angles);
  return s;
}

ScatteringSolution solve_scattering(const HelmholtzSetup& setup, const Eigen::Vector2d& khat, int far_samples) {
  const HelmholtzSolver solver(setup);
  return solve_scattering(solver, khat, far_samples);
}

namespace {

void check_point(const HelmholtzSetup& s, const Eigen::Vector2d& x, const char* what) {
  const double inner = 0.5 * s.length - s.layer;
  if (x.cwiseAbs().maxCoeff() >= inner) throw InvalidArgument(std::string(what) + ": point inside the absorbing layer");
  if (s.sharp_boundary && std::abs((x - s.support_center).norm() - s.support_radius) < 2 * s.h())
    throw InvalidArgument(std::string(what) + ": point on the scatterer boundary");
}

bool outside_support(const HelmholtzSetup& s, const Eigen::Vector2d& x) {
  return s.support_radius == 0 || (x - s.support_center).norm() > s.support_radius + 2 * s.h();
}

}  // namespace

AngularCorrelation angular_average_correlation(const HelmholtzSolver& solver, const Eigen::Vector2d& x,
                                               const Eigen::Vector2d& y, int n_dirs) {
  const HelmholtzSetup& s = solver.setup();
  if (n_dirs < 64) throw InvalidArgument("angular_average_correlation: need at least 64 directions");
  check_point(s, x, "angular_average_correlation");
  check_point(s, y, "angular_average_correlation");
  const Eigen::VectorXcd wx = solver.receiver_adjoint(x);
  const Eigen::VectorXcd wy = (x == y) ? wx : solver.receiver_adjoint(y);
  const double k = s.k();
  cplxd sum = 0, half = 0;
  for (int d = 0; d < n_dirs; ++d) {
    const double th = 2 * pi * d / n_dirs;
    const Eigen::Vector2d kh(std::cos(th), std::sin(th));
    cplxd ex = std::exp(kI * k * kh.dot(x)), ey = std::exp(kI * k * kh.dot(y));
    if (wx.squaredNorm() > 0) {
      const Eigen::VectorXcd src = solver.perturbation_source(solver.plane_wave(kh));
      ex += (wx.transpose() * src).value();
      ey += (wy.transpose() * src).value();
    }
    const cplxd term = ex * std::conj(ey);
    sum += term;
    if (d % 2 == 0) half += term;
  }
  AngularCorrelation out;
  out.n_dirs = n_dirs;
  out.value = sum * (2 * pi / n_dirs);
  out.half_value = half * (2 * pi / (n_dirs / 2));
  out.discrepancy = std::abs(out.value - out.half_value) / std::abs(out.value);
  if (out.discrepancy > 5e-3)
    out.warnings.push_back("angular quadrature: halving the directions changes C by " +
                           std::to_string(100 * out.discrepancy) + "%");
  return out;
}

AngularCorrelation angular_average_correlation(const HelmholtzSetup& setup, const Eigen::Vector2d& x,
                                               const Eigen::Vector2d& y, int n_dirs) {
  const HelmholtzSolver solver(setup);
  return angular_average_correlation(solver, x, y, n_dirs);
}

ImGReport verify_im_g_identity(const HelmholtzSolver& solver, const Eigen::Vector2d& x, const Eigen::Vector2d& y,
                               int n_dirs) {
  const HelmholtzSetup& s = solver.setup();
  if ((x - y).norm() < s.h()) throw InvalidArgument("verify_im_g_identity: x = y (G is log-singular in 2-D)");
  check_point(s, x, "verify_im_g_identity");
  check_point(s, y, "verify_im_g_identity");
  // G is symmetric: put the source at whichever point is clear of the perturbation.
  Eigen::Vector2d rx = x, src = y;
  if (!outside_support(s, y)) {
    if (!outside_support(s, x)) throw InvalidArgument("verify_im_g_identity: both points inside the perturbation");
    std::swap(rx, src);
  }
  ImGReport rep;
  const AngularCorrelation c = angular_average_correlation(solver, x, y, n_dirs);
  rep.lhs = c.value;
  rep.n_dirs = n_dirs;
  rep.warnings = c.warnings;
  cplxd g = free_space_green(s, rx, src);
  const Eigen::VectorXcd w = solver.receiver_adjoint(rx);
  if (w.squaredNorm() > 0) {
    const int M = solver.nodes_per_axis();
    Eigen::VectorXcd g0(static_cast<Eigen::Index>(M) * M);
    for (int j = 0; j < M; ++j)
      for (int i = 0; i < M; ++i) {
        const Eigen::Vector2d p = solver.node(i, j);
        // Q only reads G0 on the perturbation, away from the source.
        g0(solver.index(i, j)) = (p - src).norm() > 0.5 * s.h() ? free_space_green(s, p, src) : cplxd(0);
      }
    g += (w.transpose() * solver.perturbation_source(g0)).value();
  }
  rep.green = g;
  // -(2^{d+1} pi^{d-1} n0^{d/2} / omega^{d-2}) with d = 2.
  rep.rhs = -8 * pi * s.n0 * g.imag();
  rep.relative_error = std::abs(rep.lhs - rep.rhs) / std::abs(rep.lhs);
  return rep;
}

ImGReport verify_im_g_identity(const HelmholtzSetup& setup, const Eigen::Vector2d& x, const Eigen::Vector2d& y,
                               int n_dirs) {
  const HelmholtzSolver solver(setup);
  return verify_im_g_identity(solver, x, y, n_dirs);
}

nlohmann::json ImGReport::to_json() const {
  return {{"lhs", {lhs.real(), lhs.imag()}},
          {"green", {green.real(), green.imag()}},
          {"rhs", rhs},
          {"relative_error", relative_error},
          {"n_dirs", n_dirs},
          {"warnings", warnings}};
}

Eigen::VectorXcd disk_far_field(double n0, double n_inside, double radius, double omega, const Eigen::VectorXd& angles,
                                int terms) {
  const double k0 = omega / std::sqrt(n0), k1 = omega / std::sqrt(n_inside);
  const double x0 = k0 * radius, x1 = k1 * radius;
  if (terms <= 0) terms = static_cast<int>(std::ceil(std::max(x0, x1) + 4 * std::cbrt(std::max(x0, x1)) + 10));
  auto dj = [](int m, double x) { return 0.5 * (bessel_j(m - 1, x) - bessel_j(m + 1, x)); };
  auto dh = [](int m, double x) {
    // H_m' = (H_{m-1} - H_{m+1}) / 2 with H_{-m} = (-1)^m H_m.
    auto h = [](int mm, double xx) {
      const cplxd v = hankel1(std::abs(mm), xx);
      return (mm < 0 && (mm % 2)) ? -v : v;
    };
    return 0.5 * (h(m - 1, x) - h(m + 1, x));
  };
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(angles.size());
  const cplxd pre = std::sqrt(2 / (pi * k0)) * std::exp(-kI * pi / 4.0);
  for (int m = -terms; m <= terms; ++m) {
    const cplxd im = std::pow(kI, m);
    const cplxd hm = (m < 0 && (m % 2)) ? -hankel1(-m, x0) : hankel1(std::abs(m), x0);
    const double J0 = bessel_j(m, x0), J1 = bessel_j(m, x1);
    const cplxd num = n_inside * k1 * dj(m, x1) * J0 - n0 * k0 * J1 * dj(m, x0);
    const cplxd den = n0 * k0 * J1 * dh(m, x0) - n_inside * k1 * dj(m, x1) * hm;
    const cplxd b = im * num / den;
    for (Eigen::Index a = 0; a < angles.size(); ++a)
      out(a) += pre * b * std::pow(-kI, m) * std::exp(kI * static_cast<double>(m) * angles(a));
  }
  return out;
}

void write_csv(const std::string& path, const ScatteringSolution& s) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path);
  f << std::setprecision(17) << "angle,re,im\n";
  for (Eigen::Index a = 0; a < s.far_angles.size(); ++a)
    f << s.far_angles(a) << ',' << s.far_field(a).real() << ',' << s.far_field(a).imag() << '\n';
}

}  // namespace semicorr
