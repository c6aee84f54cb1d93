#include "semicorr/wave_sim.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "fft.hpp"
#include "semicorr/error.hpp"
#include "semicorr/grid_io.hpp"
#include "semicorr/phase_space.hpp"

namespace semicorr {

using std::numbers::pi;

double cfl_time_step(const Medium& m, const Grid& g, double cfl) {
  g.validate();
  if (!(m.sup_n() > 0) || !std::isfinite(m.sup_n())) throw InvalidArgument("cfl_time_step: sup n must be finite");
  return cfl * g.h() / (std::sqrt(m.sup_n()) * std::sqrt(static_cast<double>(g.dim)));
}

double band_limit(double k, const Grid& g) {
  const double kn = pi / g.h();
  const double k1 = kn / 4, k2 = kn / 2;
  k = std::abs(k);
  if (k == 0.0 || k >= k2) return 0.0;
  if (k <= k1) return 1.0;
  const double c = std::cos(0.5 * pi * (k - k1) / (k2 - k1));
  return c * c;
}

Eigen::VectorXd band_limited_delta(const Grid& g, std::size_t node) {
  g.validate();
  const auto sz = static_cast<Eigen::Index>(g.size());
  if (node >= g.size()) throw InvalidArgument("band_limited_delta: node out of range");
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(sz);
  v(static_cast<Eigen::Index>(node)) = 1.0 / std::pow(g.h(), g.dim);
  detail::dft_vector(v, g.dim, g.n, -1);
  for (Eigen::Index i = 0; i < sz; ++i) {
    const auto ij = g.unflatten(static_cast<std::size_t>(i));
    const double kx = g.wavenumber(ij[0]), ky = g.dim == 2 ? g.wavenumber(ij[1]) : 0.0;
    v(i) *= band_limit(std::hypot(kx, ky), g);
  }
  detail::dft_vector(v, g.dim, g.n, +1);
  return v.real() / static_cast<double>(sz);
}

// ---------------------------------------------------------------------------

WaveOperator::WaveOperator(const Medium& m, const Grid& g, int batch) : grid_(g), batch_(batch) {
  g.validate();
  if (g.dim != m.dim()) throw ContextMismatch("wave operator: medium and grid dimensions differ");
  if (batch < 1) throw InvalidArgument("wave operator: batch must be >= 1");
  n_nodes_ = m.sample_n(g);
  if (!n_nodes_.allFinite() || n_nodes_.minCoeff() <= 0) throw InvalidArgument("wave operator: n must be positive");
  homogeneous_ = m.homogeneous_speed();
  n0_ = n_nodes_(0);
  fft_ = std::make_unique<detail::RealFftBatch>(g.dim, g.n, batch);
  const int spec = fft_->spectral_size();
  k0_.resize(static_cast<std::size_t>(spec));
  k1_.assign(static_cast<std::size_t>(spec), 0.0);
  const int half = g.n / 2 + 1;
  auto deriv = [&](int m_slot) { return m_slot == g.n / 2 ? 0.0 : g.wavenumber(m_slot); };
  for (int s = 0; s < spec; ++s) {
    if (g.dim == 1) {
      k0_[static_cast<std::size_t>(s)] = deriv(s);
    } else {
      k0_[static_cast<std::size_t>(s)] = deriv(s / half);
      k1_[static_cast<std::size_t>(s)] = deriv(s % half);
    }
  }
  if (!homogeneous_) {
    g0_ = std::make_unique<detail::RealFftBatch>(g.dim, g.n, batch);
    if (g.dim == 2) g1_ = std::make_unique<detail::RealFftBatch>(g.dim, g.n, batch);
  }
}

WaveOperator::~WaveOperator() = default;

void WaveOperator::apply(const Eigen::MatrixXd& in, Eigen::MatrixXd& out) {
  const int real = fft_->real_size(), spec = fft_->spectral_size();
  if (in.rows() != real || in.cols() != batch_) throw InvalidArgument("wave operator: input shape mismatch");
  out.resize(real, batch_);
  const double inv = 1.0 / real;
  std::memcpy(fft_->real_buffer(), in.data(), sizeof(double) * static_cast<std::size_t>(real) * batch_);
  fft_->forward();
  cplx* U = fft_->spectral_buffer();
  if (homogeneous_) {
    for (int b = 0; b < batch_; ++b)
      for (int s = 0; s < spec; ++s) {
        const auto k = static_cast<std::size_t>(s);
        U[b * spec + s] *= -n0_ * (k0_[k] * k0_[k] + k1_[k] * k1_[k]) * inv;
      }
  } else {
    detail::RealFftBatch* gs[2] = {g0_.get(), g1_.get()};
    const std::vector<double>* ks[2] = {&k0_, &k1_};
    for (int d = 0; d < grid_.dim; ++d) {
      cplx* G = gs[d]->spectral_buffer();
      const auto& k = *ks[d];
      for (int b = 0; b < batch_; ++b)
        for (int s = 0; s < spec; ++s) G[b * spec + s] = cplx(0, k[static_cast<std::size_t>(s)]) * U[b * spec + s];
      gs[d]->backward();
      double* r = gs[d]->real_buffer();
      for (int b = 0; b < batch_; ++b)
        for (int j = 0; j < real; ++j) r[b * real + j] *= n_nodes_(j) * inv;
      gs[d]->forward();
    }
    for (int b = 0; b < batch_; ++b)
      for (int s = 0; s < spec; ++s) {
        const auto ks0 = static_cast<std::size_t>(s);
        cplx acc = cplx(0, k0_[ks0]) * gs[0]->spectral_buffer()[b * spec + s];
        if (grid_.dim == 2) acc += cplx(0, k1_[ks0]) * gs[1]->spectral_buffer()[b * spec + s];
        U[b * spec + s] = acc * inv;
      }
  }
  fft_->backward();
  std::memcpy(out.data(), fft_->real_buffer(), sizeof(double) * static_cast<std::size_t>(real) * batch_);
}

Eigen::MatrixXd WaveOperator::dense_negative() {
  const auto sz = static_cast<Eigen::Index>(grid_.size());
  Eigen::MatrixXd out(sz, sz), in(sz, batch_), col;
  for (Eigen::Index c0 = 0; c0 < sz; c0 += batch_) {
    in.setZero();
    for (int b = 0; b < batch_ && c0 + b < sz; ++b) in(c0 + b, b) = 1.0;
    apply(in, col);
    for (int b = 0; b < batch_ && c0 + b < sz; ++b) out.col(c0 + b) = -col.col(b);
  }
  return 0.5 * (out + out.transpose());
}

// ---------------------------------------------------------------------------

void save_checkpoint(const std::string& path, const WaveState& s) {
  nlohmann::json h;
  h["kind"] = "wave_state";
  h["dtype"] = "float64";
  h["dim"] = s.grid.dim;
  h["n"] = s.grid.n;
  h["length"] = s.grid.length;
  h["dt"] = s.dt;
  h["t"] = s.t;
  h["step"] = s.step;
  h["medium"] = s.medium;
  h["shape"] = {2, s.u.size()};
  h["layout"] = "u then u_prev";
  std::vector<double> data(s.u.data(), s.u.data() + s.u.size());
  data.insert(data.end(), s.u_prev.data(), s.u_prev.data() + s.u_prev.size());
  write_grid_file(path, h, data);
}

WaveState load_checkpoint(const std::string& path) {
  const auto f = read_grid_file(path);
  if (f.header.value("kind", "") != "wave_state") throw InvalidArgument("checkpoint: not a wave_state file");
  WaveState s;
  s.grid = Grid{f.header.at("dim").get<int>(), f.header.at("n").get<int>(), f.header.at("length").get<double>()};
  s.grid.validate();
  s.dt = f.header.at("dt").get<double>();
  s.t = f.header.at("t").get<double>();
  s.step = f.header.at("step").get<long>();
  s.medium = f.header.value("medium", nlohmann::json());
  const auto sz = static_cast<Eigen::Index>(s.grid.size());
  if (f.data.size() != static_cast<std::size_t>(2 * sz)) throw InvalidArgument("checkpoint: payload size mismatch");
  s.u = Eigen::Map<const Eigen::VectorXd>(f.data.data(), sz);
  s.u_prev = Eigen::Map<const Eigen::VectorXd>(f.data.data() + sz, sz);
  return s;
}

// ---------------------------------------------------------------------------

WaveSolver::WaveSolver(const Medium& m, const Grid& g, double dt, int batch, double cfl)
    : op_(m, g, batch), dt_(dt), medium_spec_(m.spec()) {
  if (!(cfl > 0) || cfl > kMaxCfl) throw InvalidArgument("wave solver: CFL constant must be in (0, 0.6]");
  const double limit = cfl_time_step(m, g, cfl);
  if (!(dt > 0)) throw InvalidArgument("wave solver: dt must be positive");
  if (dt > limit * (1 + 1e-12))
    throw InvalidArgument("wave solver: dt = " + std::to_string(dt) + " violates the CFL limit " +
                          std::to_string(limit));
  a_ = m.sample_a(g);
  if (!a_.allFinite() || a_.minCoeff() < 0) throw InvalidArgument("wave solver: attenuation must be >= 0");
  const auto sz = static_cast<Eigen::Index>(g.size());
  u_ = Eigen::MatrixXd::Zero(sz, batch);
  up_ = Eigen::MatrixXd::Zero(sz, batch);
}

void WaveSolver::set_fields(const Eigen::MatrixXd& u0, const Eigen::MatrixXd& u_prev) {
  if (u0.rows() != u_.rows() || u0.cols() != u_.cols() || u_prev.rows() != u_.rows() || u_prev.cols() != u_.cols())
    throw InvalidArgument("wave solver: field shape mismatch");
  u_ = u0;
  up_ = u_prev;
}

void WaveSolver::step(const Eigen::MatrixXd& f) {
  if (f.rows() != u_.rows() || f.cols() != u_.cols()) throw InvalidArgument("wave solver: forcing shape mismatch");
  advance(&f);
}

void WaveSolver::step() { advance(nullptr); }

void WaveSolver::advance(const Eigen::MatrixXd* f) {
  op_.apply(u_, lu_);
  const double dt2 = dt_ * dt_;
  const Eigen::Index rows = u_.rows(), cols = u_.cols();
  for (Eigen::Index c = 0; c < cols; ++c) {
    double* u = u_.col(c).data();
    double* up = up_.col(c).data();
    const double* lu = lu_.col(c).data();
    const double* fc = f ? f->col(c).data() : nullptr;
    for (Eigen::Index j = 0; j < rows; ++j) {
      const double ha = 0.5 * a_(j) * dt_;
      const double rhs = lu[j] + (fc ? fc[j] : 0.0);
      const double un = (2 * u[j] - (1 - ha) * up[j] + dt2 * rhs) / (1 + ha);
      up[j] = u[j];
      u[j] = un;
    }
  }
  ++step_;
  if (!u_.allFinite())
    throw NumericalError("wave solver: non-finite field at step " + std::to_string(step_) + " (t = " +
                         std::to_string(time()) + ")");
}

double WaveSolver::energy(int col) {
  if (col < 0 || col >= u_.cols()) throw InvalidArgument("energy: column out of range");
  Eigen::MatrixXd lup;
  op_.apply(up_, lup);
  const double hd = std::pow(grid().h(), grid().dim);
  const Eigen::VectorXd v = (u_.col(col) - up_.col(col)) / dt_;
  return 0.5 * (v.squaredNorm() - u_.col(col).dot(lup.col(col))) * hd;
}

WaveState WaveSolver::state(int col) const {
  if (col < 0 || col >= u_.cols()) throw InvalidArgument("state: column out of range");
  return WaveState{grid(), dt_, time(), step_, u_.col(col), up_.col(col), medium_spec_};
}

void WaveSolver::set_state(const WaveState& s, int col) {
  if (col < 0 || col >= u_.cols()) throw InvalidArgument("set_state: column out of range");
  if (!(s.grid == grid())) throw ContextMismatch("set_state: grid mismatch");
  if (s.dt != dt_) throw ContextMismatch("set_state: dt mismatch");
  if (s.u.size() != u_.rows() || s.u_prev.size() != u_.rows()) throw InvalidArgument("set_state: size mismatch");
  u_.col(col) = s.u;
  up_.col(col) = s.u_prev;
  step_ = s.step;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd GreensFunction::times() const {
  return Eigen::VectorXd::LinSpaced(samples.rows(), 0.0, dt * static_cast<double>(samples.rows() - 1));
}

void impulse_fields(const Medium& m, const Grid& g, const std::vector<std::size_t>& sources, long steps, double dt,
                    const std::function<void(long, const Eigen::MatrixXd&)>& visit) {
  if (sources.empty()) throw InvalidArgument("impulse_fields: no sources");
  if (steps < 0) throw InvalidArgument("impulse_fields: negative step count");
  if (dt <= 0) dt = cfl_time_step(m, g);
  const int batch = static_cast<int>(sources.size());
  WaveSolver solver(m, g, dt, batch);
  Eigen::MatrixXd f(static_cast<Eigen::Index>(g.size()), batch);
  for (int s = 0; s < batch; ++s) f.col(s) = band_limited_delta(g, sources[static_cast<std::size_t>(s)]) / dt;
  visit(0, solver.u());
  for (long j = 1; j <= steps; ++j) {
    if (j == 1)
      solver.step(f);
    else
      solver.step();
    visit(j, solver.u());
  }
}

GreensFunction greens(const Medium& m, const Grid& g, const Eigen::Vector2d& y_src,
                      const std::vector<Eigen::Vector2d>& receivers, double T, double dt) {
  g.validate();
  if (!(T >= 0) || !std::isfinite(T)) throw InvalidArgument("greens: T must be finite and >= 0");
  if (dt <= 0) dt = cfl_time_step(m, g);
  GreensFunction out;
  out.grid = g;
  out.dt = dt;
  out.source_node = g.nearest_node(y_src);
  const double off = g.wrap_delta(g.position(out.source_node), y_src).head(g.dim).norm();
  if (off > 1e-9 * g.h()) throw InvalidArgument("greens: source point is not a grid node");
  for (const auto& r : receivers) {
    const std::size_t node = g.nearest_node(r);
    const double d = g.wrap_delta(g.position(node), r).head(g.dim).norm();
    if (d > 1e-9 * g.h())
      out.warnings.push_back("receiver (" + std::to_string(r[0]) + ", " + std::to_string(r[1]) +
                             ") snapped to node " + std::to_string(node));
    out.receiver_nodes.push_back(node);
  }
  const long steps = static_cast<long>(std::ceil(T / dt - 1e-9));
  out.samples.resize(steps + 1, static_cast<Eigen::Index>(receivers.size()));
  impulse_fields(m, g, {out.source_node}, steps, dt, [&](long j, const Eigen::MatrixXd& u) {
    for (std::size_t r = 0; r < out.receiver_nodes.size(); ++r)
      out.samples(j, static_cast<Eigen::Index>(r)) = u(static_cast<Eigen::Index>(out.receiver_nodes[r]), 0);
  });
  return out;
}

// ---------------------------------------------------------------------------

HalfWaveBasis::HalfWaveBasis(const Medium& m, const Grid& g) : grid_(g) {
  g.validate();
  if (g.dim != 1) throw InvalidArgument("half_wave: 1-D only");
  if (g.n > kMaxDenseN1) throw SizeLimit("half_wave: N must be <= 512 for the dense eigensolve");
  WaveOperator op(m, g, std::min(g.n, 64));
  const Eigen::MatrixXd neg = op.dense_negative();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(neg);
  if (es.info() != Eigen::Success) throw NumericalError("half_wave: eigensolver failed");
  mu_ = es.eigenvalues();
  const double top = std::max(mu_.maxCoeff(), 1.0);
  if (mu_.minCoeff() < -1e-10 * top)
    throw NumericalError("half_wave: -div(n grad) has a negative eigenvalue " + std::to_string(mu_.minCoeff()));
  mu_ = mu_.cwiseMax(0.0);
  v_ = es.eigenvectors();
  a_ = m.sample_a(g);
  a0_ = a_(0);
  const_a_ = (a_.array() == a0_).all();
}

Eigen::MatrixXd HalfWaveBasis::sqrt_operator() const {
  return v_ * mu_.cwiseSqrt().asDiagonal() * v_.transpose();
}

namespace {

Eigen::MatrixXcd modal(const HalfWaveBasis& b, const Eigen::VectorXcd& d) {
  const Eigen::MatrixXcd v = b.eigenvectors().cast<cplx>();
  return v * d.asDiagonal() * v.adjoint();
}

}  // namespace

HalfWavePropagator half_wave(const HalfWaveBasis& b, double t) {
  HalfWavePropagator p{b.grid(), t, {}, {}};
  const auto& mu = b.eigenvalues();
  if (b.constant_attenuation()) {
    const double env = std::exp(-0.5 * b.a0() * t);
    Eigen::VectorXcd dp(mu.size()), dm(mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      dp(i) = env * std::polar(1.0, t * std::sqrt(mu(i)));
      dm(i) = std::conj(dp(i));
    }
    p.plus = modal(b, dp);
    p.minus = modal(b, dm);
  } else {
    const Eigen::MatrixXcd s = b.sqrt_operator().cast<cplx>();
    const Eigen::MatrixXcd damp = (0.5 * b.attenuation()).cast<cplx>().asDiagonal();
    const Eigen::MatrixXcd gp = t * (cplx(0, 1) * s - damp), gm = t * (cplx(0, -1) * s - damp);
    p.plus = gp.exp();
    p.minus = gm.exp();
  }
  return p;
}

HalfWavePropagator half_wave(const Medium& m, const Grid& g, double t) { return half_wave(HalfWaveBasis(m, g), t); }

Eigen::MatrixXd semiclassical_greens(const HalfWaveBasis& b, double t) {
  const auto& mu = b.eigenvalues();
  const double tol = 1e-10 * std::max(mu.maxCoeff(), 1.0);
  if (b.constant_attenuation()) {
    const double env = std::exp(-0.5 * b.a0() * t);
    Eigen::VectorXd d(mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      const double w = std::sqrt(mu(i));
      d(i) = mu(i) > tol ? env * std::sin(t * w) / w : 0.0;
    }
    return b.eigenvectors() * d.asDiagonal() * b.eigenvectors().transpose();
  }
  const HalfWavePropagator p = half_wave(b, t);
  Eigen::VectorXd inv(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) inv(i) = mu(i) > tol ? 1.0 / std::sqrt(mu(i)) : 0.0;
  const Eigen::MatrixXd sinv = b.eigenvectors() * inv.asDiagonal() * b.eigenvectors().transpose();
  const Eigen::MatrixXcd g = (p.plus - p.minus) / cplx(0, 2);
  return g.real() * sinv;
}

}  // namespace semicorr
