#include "semicorr/correlation.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "fft.hpp"
#include "semicorr/error.hpp"
#include "semicorr/grid_io.hpp"
#include "semicorr/wave_sim.hpp"

namespace semicorr {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Empirical:
      return "empirical";
    case Provenance::Exact:
      return "exact";
    case Provenance::Semiclassical:
      return "semiclassical";
  }
  return "unknown";
}

Eigen::VectorXd CorrelationRecord::taus() const {
  const long j = half_width();
  Eigen::VectorXd t(values.size());
  for (long l = -j; l <= j; ++l) t(l + j) = tau(l);
  return t;
}

CorrelationRecord CorrelationRecord::reflected() const {
  CorrelationRecord r = *this;
  r.values = values.reverse();
  if (realizations.size()) r.realizations = realizations.colwise().reverse();
  std::swap(r.a, r.b);
  return r;
}

namespace {

long good_size(long n) {
  for (long m = std::max(n, 1L);; ++m) {
    long k = m;
    for (long p : {2L, 3L, 5L, 7L})
      while (k % p == 0) k /= p;
    if (k == 1) return m;
  }
}

// r(s, c) = sum_i x(i, c) y(i + s, c) for s = 0..smax, y zero beyond its rows.
Eigen::MatrixXd lagged_products(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, long smax) {
  const long p = good_size(static_cast<long>(std::max(x.rows(), y.rows())) + smax + 1);
  const auto cols = x.cols();
  Eigen::MatrixXcd fx = Eigen::MatrixXcd::Zero(p, cols), fy = Eigen::MatrixXcd::Zero(p, cols);
  fx.topRows(x.rows()) = x.cast<cplx>();
  fy.topRows(y.rows()) = y.cast<cplx>();
  detail::dft_columns(fx, 1, static_cast<int>(p), -1);
  detail::dft_columns(fy, 1, static_cast<int>(p), -1);
  Eigen::MatrixXcd prod = fx.conjugate().cwiseProduct(fy);
  detail::dft_columns(prod, 1, static_cast<int>(p), +1);
  return prod.topRows(smax + 1).real() / static_cast<double>(p);
}

double attenuation_horizon(const Medium& m, double factor, const char* what) {
  const double tatt = attenuation_time(m);
  if (!std::isfinite(tatt))
    throw InvalidArgument(std::string(what) + ": attenuation is zero somewhere; give an explicit horizon");
  return factor * tatt;
}

std::size_t snap(const Grid& g, const Eigen::Vector2d& x, const char* label, std::vector<std::string>& warnings) {
  const std::size_t node = g.nearest_node(x);
  if (g.wrap_delta(g.position(node), x).norm() > 1e-9 * g.h())
    warnings.push_back(std::string("receiver ") + label + " snapped to node " + std::to_string(node));
  return node;
}

}  // namespace

CorrelationRecord empirical_correlation(const TraceSet& a, const TraceSet& b, double tau_max, double burn_in,
                                        double window) {
  if (a.dt != b.dt) throw ContextMismatch("empirical_correlation: traces have different dt");
  if (a.t0 != b.t0 || a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
    throw ContextMismatch("empirical_correlation: trace sets are not aligned");
  if (!(a.dt > 0)) throw InvalidArgument("empirical_correlation: dt must be positive");
  if (!(tau_max > 0) || !(burn_in >= 0)) throw InvalidArgument("empirical_correlation: bad tau_max or burn_in");
  if (a.values.cols() < 1) throw InvalidArgument("empirical_correlation: no realizations");
  const double dt = a.dt;
  const long rows = a.values.rows();
  const double length = static_cast<double>(rows) * dt;
  if (length + 1e-9 * dt < burn_in - a.t0 + 10 * tau_max)
    throw InvalidArgument("empirical_correlation: record shorter than burn_in + 10 tau_max");
  const long J = std::lround(tau_max / dt);
  const long s0 = std::max(0L, static_cast<long>(std::ceil((burn_in - a.t0) / dt - 1e-9))) + J;
  const long avail = rows - s0 - J;
  long w = window > 0 ? std::lround(window / dt) : avail;
  if (w < 1 || w > avail) throw InvalidArgument("empirical_correlation: averaging window does not fit the record");

  const Eigen::MatrixXd x = a.values.middleRows(s0, w);
  const Eigen::MatrixXd y = b.values.middleRows(s0 - J, w + 2 * J);
  const Eigen::MatrixXd r = lagged_products(x, y, 2 * J);

  CorrelationRecord rec;
  rec.dtau = dt;
  rec.provenance = Provenance::Empirical;
  rec.window = static_cast<double>(w) * dt;
  rec.ensemble = a.values.cols();
  rec.realizations.resize(2 * J + 1, a.values.cols());
  for (long l = -J; l <= J; ++l) rec.realizations.row(l + J) = r.row(J - l) / static_cast<double>(w);
  rec.values = rec.realizations.rowwise().mean();
  if (!rec.values.allFinite()) throw NumericalError("empirical_correlation: non-finite result");
  return rec;
}

CorrelationRecord correlation_derivative(const CorrelationRecord& rec) {
  const auto n = rec.values.size();
  if (n < 3) throw InvalidArgument("correlation_derivative: need at least 3 lags");
  if (!(rec.dtau > 0)) throw InvalidArgument("correlation_derivative: lag grid must be uniform");
  auto diff = [&](const Eigen::VectorXd& c) {
    Eigen::VectorXd d(n);
    const double h = rec.dtau;
    for (Eigen::Index i = 1; i + 1 < n; ++i) d(i) = (c(i + 1) - c(i - 1)) / (2 * h);
    d(0) = (-3 * c(0) + 4 * c(1) - c(2)) / (2 * h);
    d(n - 1) = (3 * c(n - 1) - 4 * c(n - 2) + c(n - 3)) / (2 * h);
    return d;
  };
  CorrelationRecord out = rec;
  out.values = diff(rec.values);
  for (Eigen::Index c = 0; c < rec.realizations.cols(); ++c) out.realizations.col(c) = diff(rec.realizations.col(c));
  return out;
}

SimulationPlan plan_simulation(const Medium& m, const Grid& g, const SimulationOptions& opt) {
  SimulationPlan p{};
  p.dt = opt.dt > 0 ? opt.dt : cfl_time_step(m, g, 0.25);
  if (!(opt.tau_max > 0)) throw InvalidArgument("simulation: tau_max must be positive");
  p.tau_max = opt.tau_max;
  p.window = opt.window > 0 ? opt.window : 200 * opt.tau_max;
  p.burn_in = opt.burn_in >= 0 ? opt.burn_in : attenuation_horizon(m, 5.0, "simulation burn-in");
  p.steps = static_cast<long>(std::ceil((p.burn_in + p.window + 2 * p.tau_max) / p.dt)) + 1;
  return p;
}

std::vector<TraceSet> simulate_traces(const Medium& m, const NoiseModel& nm, const std::vector<std::size_t>& nodes,
                                      const SimulationOptions& opt) {
  const Grid& g = nm.context().grid;
  if (opt.ensemble < 1) throw InvalidArgument("simulation: ensemble must be >= 1");
  if (opt.batch < 1 || opt.threads < 1) throw InvalidArgument("simulation: batch and threads must be >= 1");
  for (auto n : nodes)
    if (n >= g.size()) throw InvalidArgument("simulation: receiver node out of range");
  const SimulationPlan plan = plan_simulation(m, g, opt);
  const NoiseModel model = nm.with_dt(plan.dt);
  // k = 0 forcing would drive an undamped random walk of the mean.
  Eigen::MatrixXd f = model.factor();
  if (f.cols() > 0) f.rowwise() -= f.colwise().mean();
  const double scale = 1.0 / std::sqrt(plan.dt);

  std::vector<TraceSet> out(nodes.size());
  for (auto& t : out) {
    t.dt = plan.dt;
    t.t0 = 0;
    t.values = Eigen::MatrixXd::Zero(plan.steps + 1, opt.ensemble);
  }
  const long nchunks = (opt.ensemble + opt.batch - 1) / opt.batch;
  std::atomic<long> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    try {
      for (long c = next++; c < nchunks; c = next++) {
        const long first = c * opt.batch;
        const int b = static_cast<int>(std::min<long>(opt.batch, opt.ensemble - first));
        WaveSolver solver(m, g, plan.dt, b);
        Eigen::MatrixXd z(f.cols(), b), forcing(static_cast<Eigen::Index>(g.size()), b);
        for (long n = 0; n < plan.steps; ++n) {
          if (f.cols() > 0) {
            for (int r = 0; r < b; ++r)
              model.latent(n, opt.first_realization + first + r,
                           std::span<double>(z.col(r).data(), static_cast<std::size_t>(f.cols())));
            forcing.noalias() = f * z;
            forcing *= scale;
            solver.step(forcing);
          } else {
            solver.step();
          }
          for (std::size_t k = 0; k < nodes.size(); ++k)
            out[k].values.row(n + 1).segment(first, b) = solver.u().row(static_cast<Eigen::Index>(nodes[k]));
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = nchunks;
    }
  };
  const int nthreads = static_cast<int>(std::min<long>(opt.threads, nchunks));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

CorrelationRecord simulate_correlation(const Medium& m, const NoiseModel& nm, const Eigen::Vector2d& a,
                                       const Eigen::Vector2d& b, const SimulationOptions& opt,
                                       std::vector<TraceSet>* traces) {
  const Grid& g = nm.context().grid;
  std::vector<std::string> warnings;
  const std::size_t na = snap(g, a, "A", warnings), nb = snap(g, b, "B", warnings);
  const SimulationPlan plan = plan_simulation(m, g, opt);
  auto tr = simulate_traces(m, nm, {na, nb}, opt);
  CorrelationRecord rec = empirical_correlation(tr[0], tr[1], plan.tau_max, plan.burn_in, plan.window);
  rec.a = g.position(na);
  rec.b = g.position(nb);
  rec.warnings = warnings;
  if (traces) *traces = std::move(tr);
  return rec;
}

CorrelationRecord exact_correlation(const Medium& m, const NoiseModel& nm, const Eigen::Vector2d& a,
                                    const Eigen::Vector2d& b, double tau_max, const ExactOptions& opt) {
  const Grid& g = nm.context().grid;
  if (!(tau_max > 0)) throw InvalidArgument("exact_correlation: tau_max must be positive");
  const double dt = opt.dt > 0 ? opt.dt : cfl_time_step(m, g, 0.25);
  const double horizon = opt.horizon > 0 ? opt.horizon : attenuation_horizon(m, 8.0, "exact_correlation");
  CorrelationRecord rec;
  rec.provenance = Provenance::Exact;
  rec.dtau = dt;
  rec.ensemble = 0;
  const std::size_t na = snap(g, a, "A", rec.warnings), nb = snap(g, b, "B", rec.warnings);
  rec.a = g.position(na);
  rec.b = g.position(nb);
  const long J = std::lround(tau_max / dt);
  const long H = static_cast<long>(std::ceil(horizon / dt));
  rec.window = horizon;

  Eigen::MatrixXd f = nm.with_dt(dt).factor();
  if (f.cols() == 0) {
    rec.values = Eigen::VectorXd::Zero(2 * J + 1);
    return rec;
  }
  f.rowwise() -= f.colwise().mean();
  const double hd = std::pow(g.h(), g.dim);
  const Eigen::MatrixXd ft = std::sqrt(hd) * f.transpose();

  // q_X(j) = h^{d/2} F^T G(t_j, ., X) for j = 0..H+J.
  Eigen::MatrixXd qa(H + J + 1, f.cols()), qb(H + J + 1, f.cols());
  {
    WaveSolver solver(m, g, dt, 2);
    Eigen::MatrixXd kick = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.size()), 2);
    kick(static_cast<Eigen::Index>(na), 0) = 1.0 / (hd * dt);
    kick(static_cast<Eigen::Index>(nb), 1) = 1.0 / (hd * dt);
    qa.row(0).setZero();
    qb.row(0).setZero();
    for (long j = 1; j <= H + J; ++j) {
      if (j == 1)
        solver.step(kick);
      else
        solver.step();
      const Eigen::MatrixXd q = ft * solver.u();
      qa.row(j) = q.col(0).transpose();
      qb.row(j) = q.col(1).transpose();
    }
  }
  // C(l) = dt sum_j q_A(j + l) . q_B(j), j in [0, H] (and j + l >= 0).
  auto correlate = [&](long h) {
    Eigen::MatrixXd ya = Eigen::MatrixXd::Zero(h + 1 + 2 * J, f.cols());
    ya.bottomRows(h + 1 + J) = qa.topRows(h + 1 + J);
    const Eigen::MatrixXd r = lagged_products(qb.topRows(h + 1), ya, 2 * J);
    return Eigen::VectorXd(r.rowwise().sum() * dt);
  };
  rec.values = correlate(H);
  const double tatt = attenuation_time(m);
  const long last = std::isfinite(tatt) ? std::min(H, static_cast<long>(std::ceil(tatt / dt))) : H / 8;
  const Eigen::VectorXd partial = correlate(H - last);
  // Terms decay like exp(-2 t / T_att); extrapolate the last window geometrically.
  const double ratio = std::exp(-2.0 * static_cast<double>(last) * dt / (std::isfinite(tatt) ? tatt : horizon));
  const double peak = rec.values.cwiseAbs().maxCoeff();
  rec.tail_ratio = peak > 0 ? (rec.values - partial).cwiseAbs().maxCoeff() * ratio / (1 - ratio) / peak : 0.0;
  if (rec.tail_ratio > opt.tail_warning)
    rec.warnings.push_back("truncation tail estimate " + std::to_string(rec.tail_ratio) + " exceeds " +
                           std::to_string(opt.tail_warning) + " of the result");
  if (!rec.values.allFinite()) throw NumericalError("exact_correlation: non-finite result");
  return rec;
}

void write_csv(const std::string& path, const CorrelationRecord& rec) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot open '" + path + "' for writing");
  os << "tau,value,provenance\n";
  const std::string prov = to_string(rec.provenance);
  const long j = rec.half_width();
  for (long l = -j; l <= j; ++l) os << format_double(rec.tau(l)) << ',' << format_double(rec.at(l)) << ',' << prov << '\n';
}

void write_overlay_csv(const std::string& path, const std::vector<std::string>& names,
                       const std::vector<const CorrelationRecord*>& recs) {
  if (names.size() != recs.size() || recs.empty()) throw InvalidArgument("overlay: names and records differ");
  for (const auto* r : recs)
    if (r->values.size() != recs[0]->values.size() || std::abs(r->dtau - recs[0]->dtau) > 1e-12 * recs[0]->dtau)
      throw ContextMismatch("overlay: records are on different lag grids");
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot open '" + path + "' for writing");
  os << "tau";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  const long j = recs[0]->half_width();
  for (long l = -j; l <= j; ++l) {
    os << format_double(recs[0]->tau(l));
    for (const auto* r : recs) os << ',' << format_double(r->at(l));
    os << '\n';
  }
}

nlohmann::json record_metadata(const CorrelationRecord& rec) {
  nlohmann::json j;
  j["provenance"] = to_string(rec.provenance);
  j["a"] = {rec.a[0], rec.a[1]};
  j["b"] = {rec.b[0], rec.b[1]};
  j["dtau"] = rec.dtau;
  j["tau_max"] = rec.tau(rec.half_width());
  j["lags"] = rec.values.size();
  j["window"] = rec.window;
  j["ensemble"] = rec.ensemble;
  if (rec.provenance == Provenance::Exact) j["tail_ratio"] = rec.tail_ratio;
  j["warnings"] = rec.warnings;
  return j;
}

void write_traces_csv(const std::string& path, const TraceSet& t) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot open '" + path + "' for writing");
  os << "t";
  for (Eigen::Index c = 0; c < t.values.cols(); ++c) os << ",r" << c;
  os << '\n';
  for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
    os << format_double(t.t0 + static_cast<double>(i) * t.dt);
    for (Eigen::Index c = 0; c < t.values.cols(); ++c) os << ',' << format_double(t.values(i, c));
    os << '\n';
  }
}

double relative_l2(const CorrelationRecord& x, const CorrelationRecord& ref, double tau_lo, double tau_hi, int sign) {
  if (x.values.size() != ref.values.size() || std::abs(x.dtau - ref.dtau) > 1e-12 * ref.dtau)
    throw ContextMismatch("relative_l2: records are on different lag grids");
  double num = 0, den = 0;
  const long j = ref.half_width();
  for (long l = -j; l <= j; ++l) {
    const double t = ref.tau(l);
    if (std::abs(t) < tau_lo - 1e-12 || std::abs(t) > tau_hi + 1e-12) continue;
    if ((sign > 0 && l <= 0) || (sign < 0 && l >= 0)) continue;
    num += std::pow(x.at(l) - ref.at(l), 2);
    den += std::pow(ref.at(l), 2);
  }
  if (den == 0) throw InvalidArgument("relative_l2: reference vanishes on the window");
  return std::sqrt(num / den);
}

}  // namespace semicorr
