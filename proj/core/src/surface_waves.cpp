#include "semicorr/surface_waves.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

#include "semicorr/error.hpp"

namespace semicorr {

std::string to_string(SurfaceBC bc) { return bc == SurfaceBC::Neumann ? "neumann" : "dirichlet"; }

DepthProfile DepthProfile::constant(double n0, double depth, SurfaceBC bc) {
  DepthProfile p;
  p.depth = depth;
  p.n = [n0](double) { return n0; };
  p.surface = bc;
  p.spec = {{"kind", "constant"}, {"n0", n0}, {"depth", depth}, {"surface", to_string(bc)}};
  p.validate();
  return p;
}

DepthProfile DepthProfile::layered(const std::vector<double>& values, const std::vector<double>& breaks, double depth,
                                   SurfaceBC bc) {
  if (values.size() != breaks.size() + 1) throw InvalidArgument("layered profile: need one value per layer");
  for (std::size_t i = 0; i < breaks.size(); ++i)
    if (!(breaks[i] > (i ? breaks[i - 1] : 0.0)) || !(breaks[i] < depth))
      throw InvalidArgument("layered profile: breaks must be ascending inside (0, depth)");
  DepthProfile p;
  p.depth = depth;
  p.interfaces = breaks;
  p.n = [values, breaks](double z) {
    const auto i = std::upper_bound(breaks.begin(), breaks.end(), z) - breaks.begin();
    return values[static_cast<std::size_t>(i)];
  };
  p.surface = bc;
  p.spec = {{"kind", "layered"}, {"values", values}, {"breaks", breaks}, {"depth", depth}, {"surface", to_string(bc)}};
  p.validate();
  return p;
}

DepthProfile DepthProfile::sampled(const Eigen::VectorXd& z, const Eigen::VectorXd& n, SurfaceBC bc) {
  if (z.size() < 2 || z.size() != n.size()) throw InvalidArgument("sampled profile: need matching z and n samples");
  if (z(0) != 0.0) throw InvalidArgument("sampled profile: samples must start at the surface z = 0");
  for (Eigen::Index i = 1; i < z.size(); ++i)
    if (!(z(i) > z(i - 1))) throw InvalidArgument("sampled profile: z must be ascending");
  std::vector<double> zs(z.data(), z.data() + z.size()), ns(n.data(), n.data() + n.size());
  DepthProfile p;
  p.depth = zs.back();
  p.n = [zs, ns](double x) {
    if (x <= zs.front()) return ns.front();
    if (x >= zs.back()) return ns.back();
    const auto i = static_cast<std::size_t>(std::upper_bound(zs.begin(), zs.end(), x) - zs.begin());
    const double t = (x - zs[i - 1]) / (zs[i] - zs[i - 1]);
    return (1 - t) * ns[i - 1] + t * ns[i];
  };
  p.surface = bc;
  p.spec = {{"kind", "sampled"}, {"z", zs}, {"n", ns}, {"surface", to_string(bc)}};
  p.validate();
  return p;
}

void DepthProfile::validate() const {
  if (!(depth > 0) || !std::isfinite(depth)) throw InvalidArgument("depth profile: H must be positive");
  if (!n) throw InvalidArgument("depth profile: n is not set");
  for (int i = 0; i <= 64; ++i) {
    const double v = n(depth * i / 64.0);
    if (!(v > 0) || !std::isfinite(v)) throw InvalidArgument("depth profile: n must be positive");
  }
}

namespace {

// 4-point Gauss-Legendre on [a, b], split at the profile's interfaces.
template <class F>
double piecewise_integral(const DepthProfile& p, double a, double b, F&& f) {
  static const double x[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
  static const double w[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
  double acc = 0, lo = a;
  auto piece = [&](double l, double r) {
    const double c = 0.5 * (l + r), hw = 0.5 * (r - l);
    for (int i = 0; i < 4; ++i) acc += hw * w[i] * f(p.n(c + hw * x[i]));
  };
  for (double z : p.interfaces) {
    if (z <= lo || z >= b) continue;
    piece(lo, z);
    lo = z;
  }
  piece(lo, b);
  return acc;
}

struct Tridiagonal {
  Eigen::VectorXd diag, sub, z;
  double h = 0;
};

Tridiagonal assemble(const DepthProfile& p, double xi, int points) {
  if (points < 64) throw InvalidArgument("sturm_liouville_modes: need at least 64 depth points");
  if (!(xi >= 0) || !std::isfinite(xi)) throw InvalidArgument("sturm_liouville_modes: |xi| must be finite and >= 0");
  p.validate();
  Tridiagonal t;
  const int M = points;
  t.h = p.depth / M;
  const double h = t.h;
  t.z.resize(M);
  for (int j = 0; j < M; ++j) t.z(j) = (j + 0.5) * h;
  auto inv = [](double v) { return 1 / v; };
  auto id = [](double v) { return v; };
  // Face coefficients: harmonic means over the dual cells.
  Eigen::VectorXd k(M + 1);
  for (int f = 1; f < M; ++f) k(f) = h / piecewise_integral(p, t.z(f - 1), t.z(f), inv);
  k(0) = 0.5 * h / piecewise_integral(p, 0.0, t.z(0), inv);
  k(M) = 0.5 * h / piecewise_integral(p, t.z(M - 1), p.depth, inv);
  t.diag.resize(M);
  t.sub.resize(M - 1);
  const double h2 = h * h;
  for (int j = 0; j < M; ++j) {
    const double c = piecewise_integral(p, j * h, (j + 1) * h, id) / h;
    double d = c * xi * xi;
    if (j > 0) d += k(j) / h2;
    if (j < M - 1) d += k(j + 1) / h2;
    if (j == 0 && p.surface == SurfaceBC::Dirichlet) d += 2 * k(0) / h2;
    if (j == M - 1) d += 2 * k(M) / h2;
    t.diag(j) = d;
    if (j < M - 1) t.sub(j) = -k(j + 1) / h2;
  }
  return t;
}

Eigen::VectorXd eigenvalues_only(const DepthProfile& p, double xi, int points) {
  const Tridiagonal t = assemble(p, xi, points);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(t.diag, t.sub, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("sturm_liouville_modes: eigensolver failed");
  return es.eigenvalues();
}

}  // namespace

SturmLiouvilleModes sturm_liouville_modes(const DepthProfile& prof, double xi, int n_modes, int points) {
  if (n_modes < 1 || n_modes > points) throw InvalidArgument("sturm_liouville_modes: bad mode count");
  const Tridiagonal t = assemble(prof, xi, points);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(t.diag, t.sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw NumericalError("sturm_liouville_modes: eigensolver failed");
  SturmLiouvilleModes out;
  out.xi = xi;
  out.z = t.z;
  out.values = es.eigenvalues().head(n_modes);
  out.functions = es.eigenvectors().leftCols(n_modes) / std::sqrt(t.h);
  for (int m = 0; m < n_modes; ++m) {
    auto col = out.functions.col(m);
    Eigen::Index i = 0;
    while (i < col.size() && std::abs(col(i)) < 1e-12 * col.cwiseAbs().maxCoeff()) ++i;
    if (i < col.size() && col(i) < 0) col *= -1;
  }
  // Mode m has about (m + 1) / 2 vertical wavelengths over the depth.
  if (4 * n_modes > points)
    out.warnings.push_back("modes above " + std::to_string(points / 4 - 1) +
                           " have fewer than 8 cells per vertical wavelength");
  return out;
}

DispersionCurve dispersion_curve(const DepthProfile& prof, const Eigen::VectorXd& xi, int branch, int points) {
  if (xi.size() < 2) throw InvalidArgument("dispersion_curve: need at least two wavenumbers");
  for (Eigen::Index i = 0; i < xi.size(); ++i)
    if (!(xi(i) > 0) || (i > 0 && !(xi(i) > xi(i - 1))))
      throw InvalidArgument("dispersion_curve: xi must be positive and ascending");
  if (branch < 0 || branch + 1 >= points) throw InvalidArgument("dispersion_curve: bad branch");
  DispersionCurve c;
  c.branch = branch;
  c.xi = xi;
  c.surface = prof.surface;
  c.points = points;
  c.values.resize(xi.size());
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    const Eigen::VectorXd ev = eigenvalues_only(prof, xi(i), points);
    const double v = ev(branch);
    double gap = ev(branch + 1) - v;
    if (branch > 0) gap = std::min(gap, v - ev(branch - 1));
    if (gap < 1e-8 * std::abs(v)) c.near_degenerate = true;
    c.values(i) = v;
  }
  if (c.near_degenerate) c.warnings.push_back("branch " + std::to_string(branch) + " nearly degenerate");
  const Eigen::Index n = xi.size();
  c.slope.resize(n);
  if (n == 2) {
    c.slope.setConstant((c.values(1) - c.values(0)) / (xi(1) - xi(0)));
  } else {
    // Three-point differences on a possibly nonuniform grid.
    auto d3 = [&](Eigen::Index i0, Eigen::Index at) {
      const double x0 = xi(i0), x1 = xi(i0 + 1), x2 = xi(i0 + 2), x = xi(at);
      const double l0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
      const double l1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
      const double l2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
      return l0 * c.values(i0) + l1 * c.values(i0 + 1) + l2 * c.values(i0 + 2);
    };
    c.slope(0) = d3(0, 0);
    for (Eigen::Index i = 1; i + 1 < n; ++i) c.slope(i) = d3(i - 1, i);
    c.slope(n - 1) = d3(n - 3, n - 1);
  }
  return c;
}

double effective_hamiltonian(const std::function<DepthProfile(double)>& profile_at, double x0, double xi, int branch,
                             int points) {
  return eigenvalues_only(profile_at(x0), xi, points)(branch);
}

ProfileFamily two_layer_family(double depth, SurfaceBC bc) {
  ProfileFamily f;
  f.name = "two-layer";
  f.parameters = {"n_top", "n_bottom", "interface"};
  f.make = [depth, bc](const Eigen::VectorXd& th) {
    return DepthProfile::layered({th(0), th(1)}, {th(2)}, depth, bc);
  };
  f.lower = Eigen::Vector3d(1e-3, 1e-3, 0.02 * depth);
  f.upper = Eigen::Vector3d(1e3, 1e3, 0.98 * depth);
  return f;
}

namespace {

struct FitFunctor : Eigen::DenseFunctor<double> {
  const DispersionCurve* target;
  const ProfileFamily* family;
  int points;
  Eigen::VectorXd weight;
  mutable int evaluations = 0;

  FitFunctor(const DispersionCurve& t, const ProfileFamily& f, int pts, bool relative)
      : Eigen::DenseFunctor<double>(static_cast<int>(f.lower.size()), static_cast<int>(t.xi.size())),
        target(&t),
        family(&f),
        points(pts) {
    if (relative)
      weight = t.values.cwiseInverse() / std::sqrt(static_cast<double>(t.values.size()));
    else
      weight = Eigen::VectorXd::Constant(t.values.size(), 1 / t.values.norm());
  }

  Eigen::VectorXd clamp(const Eigen::VectorXd& th) const { return th.cwiseMax(family->lower).cwiseMin(family->upper); }

  int operator()(const Eigen::VectorXd& th, Eigen::VectorXd& r) const {
    ++evaluations;
    const DepthProfile p = family->make(clamp(th));
    r.resize(target->xi.size());
    for (Eigen::Index i = 0; i < r.size(); ++i)
      r(i) = weight(i) * (eigenvalues_only(p, target->xi(i), points)(target->branch) - target->values(i));
    return 0;
  }
};

}  // namespace

InversionReport invert_profile(const DispersionCurve& target, const ProfileFamily& family, const Eigen::VectorXd& init,
                               const InversionOptions& opt) {
  const auto dim = family.lower.size();
  if (dim < 1 || dim > 6) throw InvalidArgument("invert_profile: family dimension must be 1..6");
  if (init.size() != dim) throw InvalidArgument("invert_profile: init has the wrong dimension");
  if (target.xi.size() < 10) throw InvalidArgument("invert_profile: target must cover at least 10 wavenumbers");
  if (target.values.size() != target.xi.size()) throw InvalidArgument("invert_profile: malformed target");
  if (opt.relative_misfit && !(target.values.array() > 0).all())
    throw InvalidArgument("invert_profile: relative misfit needs positive target values");
  const int points = opt.points > 0 ? opt.points : target.points;

  using NumDiff = Eigen::NumericalDiff<FitFunctor, Eigen::Central>;
  InversionReport best;
  best.residual = std::numeric_limits<double>::infinity();
  int total = 0;
  bool any_converged = false;
  for (int s = 0; s < std::max(1, opt.starts); ++s) {
    Eigen::VectorXd x = init;
    if (s > 0) {
      // Deterministic +-20% sign patterns: bit i of s picks the sign of parameter i.
      for (Eigen::Index i = 0; i < dim; ++i) x(i) *= (s >> i) & 1 ? 1.2 : 0.8;
    }
    FitFunctor fn(target, family, points, opt.relative_misfit);
    x = fn.clamp(x);
    NumDiff nd(fn);
    Eigen::LevenbergMarquardt<NumDiff> lm(nd);
    lm.setXtol(opt.tolerance);
    lm.setFtol(opt.tolerance);
    lm.setGtol(0);
    lm.setMaxfev(opt.max_evaluations);
    std::vector<double> history;
    Eigen::VectorXd r0;
    fn(x, r0);
    history.push_back(r0.norm());
    auto status = Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall;
    if (r0.norm() > opt.tolerance) {
      status = lm.minimizeInit(x);
      if (status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters) {
        do {
          status = lm.minimizeOneStep(x);
          if (lm.fnorm() < history.back()) history.push_back(lm.fnorm());
        } while (status == Eigen::LevenbergMarquardtSpace::Running && fn.evaluations < opt.max_evaluations);
      }
    }
    total += fn.evaluations;
    const bool converged = status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation &&
                           status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters &&
                           status != Eigen::LevenbergMarquardtSpace::Running;
    x = fn.clamp(x);
    Eigen::VectorXd r;
    fn(x, r);
    const double res = r.norm();
    if (res < best.residual) {
      best.theta = x;
      best.residual = res;
      best.history = history;
      best.converged = converged;
      // Covariance proxy from the weighted Jacobian at the optimum (the
      // residual weights cancel).
      Eigen::MatrixXd J(target.xi.size(), dim);
      nd.df(x, J);
      const double dof = std::max<double>(1, static_cast<double>(target.xi.size() - dim));
      const double sigma2 = r.squaredNorm() / dof;
      best.covariance = sigma2 * (J.transpose() * J).completeOrthogonalDecomposition().pseudoInverse();
    }
    any_converged = any_converged || converged;
    if (best.residual <= opt.tolerance) break;
  }
  best.evaluations = total;
  best.profile = family.make(best.theta);
  if (!best.converged) best.notes.push_back("evaluation budget exhausted: best-so-far returned");
  if (!any_converged) best.converged = false;
  return best;
}

nlohmann::json InversionReport::to_json(const ProfileFamily& family) const {
  nlohmann::json j;
  j["family"] = family.name;
  for (Eigen::Index i = 0; i < theta.size(); ++i) j["theta"][family.parameters[static_cast<std::size_t>(i)]] = theta(i);
  j["residual"] = residual;
  j["history"] = history;
  j["converged"] = converged;
  j["evaluations"] = evaluations;
  j["notes"] = notes;
  for (Eigen::Index r = 0; r < covariance.rows(); ++r) {
    std::vector<double> row(covariance.cols());
    for (Eigen::Index c = 0; c < covariance.cols(); ++c) row[static_cast<std::size_t>(c)] = covariance(r, c);
    j["covariance"].push_back(row);
  }
  j["profile"] = profile.spec;
  return j;
}

void write_csv(const std::string& path, const DepthProfile& prof, int points) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path);
  f << std::setprecision(17) << "z,n\n";
  for (int j = 0; j < points; ++j) {
    const double z = (j + 0.5) * prof.depth / points;
    f << z << ',' << prof.n(z) << '\n';
  }
}

void write_csv(const std::string& path, const DispersionCurve& curve) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path);
  f << std::setprecision(17) << "xi,lambda,slope\n";
  for (Eigen::Index i = 0; i < curve.xi.size(); ++i)
    f << curve.xi(i) << ',' << curve.values(i) << ',' << curve.slope(i) << '\n';
}

}  // namespace semicorr
