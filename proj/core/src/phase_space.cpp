#include "semicorr/phase_space.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "fft.hpp"
#include "semicorr/error.hpp"

namespace semicorr {

namespace {

using detail::dft_columns;
using detail::dft_rows;

// Half-shift factor of the midpoint interpolation for one axis, indexed by
// FFT slots (q, r). Nyquist rows/columns are split symmetrically.
Eigen::MatrixXcd half_shift_1d(int n) {
  Eigen::MatrixXcd c(n, n);
  const int half = n / 2;
  auto sgn = [&](int i) { return i < half ? i : i - n; };
  for (int qi = 0; qi < n; ++qi) {
    const int q = sgn(qi);
    for (int ri = 0; ri < n; ++ri) {
      const int r = sgn(ri);
      if (q == -half && r == -half)
        c(qi, ri) = std::cos(std::numbers::pi * (-half) / 2.0);
      else if (q == -half)
        c(qi, ri) = std::cos(std::numbers::pi * r / 2.0);
      else if (r == -half)
        c(qi, ri) = std::cos(std::numbers::pi * q / 2.0);
      else
        c(qi, ri) = std::polar(1.0, -std::numbers::pi * q * r / n);
    }
  }
  return c;
}

Eigen::MatrixXcd half_shift(const Grid& g) {
  const Eigen::MatrixXcd c1 = half_shift_1d(g.n);
  if (g.dim == 1) return c1;
  const auto sz = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXcd c(sz, sz);
  for (Eigen::Index q = 0; q < sz; ++q) {
    const auto qq = g.unflatten(static_cast<std::size_t>(q));
    for (Eigen::Index r = 0; r < sz; ++r) {
      const auto rr = g.unflatten(static_cast<std::size_t>(r));
      c(q, r) = c1(qq[0], rr[0]) * c1(qq[1], rr[1]);
    }
  }
  return c;
}

// Flat index of j - r (componentwise, periodic).
std::size_t sub_index(const Grid& g, std::size_t j, std::size_t r) {
  const auto jj = g.unflatten(j);
  const auto rr = g.unflatten(r);
  return g.flatten(jj[0] - rr[0], jj[1] - rr[1]);
}

double pow_d(double v, int d) { return d == 1 ? v : v * v; }

// Fornberg weights for the first derivative at z from nodes x[0..k).
std::vector<double> fd_weights(double z, const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<double>> c(n, std::vector<double>(2, 0.0));
  double c1 = 1.0, c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, 1);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = c[i][1];
  return w;
}

constexpr int kStencil = 9;

// Stencil weights (unit spacing) for evaluation at offset o inside the stencil.
const std::vector<double>& stencil(int o) {
  static std::once_flag flag;
  static std::vector<std::vector<double>> table;
  std::call_once(flag, [] {
    std::vector<double> x(kStencil);
    for (int i = 0; i < kStencil; ++i) x[i] = i;
    for (int o2 = 0; o2 < kStencil; ++o2) table.push_back(fd_weights(o2, x));
  });
  return table[o];
}

// Derivative along one axis of the row index of A. Positions along the axis
// are sorted by `slot(s)` (s = sorted position) with uniform spacing.
Eigen::MatrixXcd diff_rows(const Eigen::MatrixXcd& A, const Grid& g, int axis, double spacing, bool fft_order) {
  const int n = g.n;
  if (n < kStencil) throw InvalidArgument("poisson_bracket needs at least 9 points per axis");
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(A.rows(), A.cols());
  auto slot = [&](int s) { return fft_order ? (s + n / 2) % n : s; };
  const int lines = g.dim == 1 ? 1 : n;
  for (int line = 0; line < lines; ++line) {
    for (int s = 0; s < n; ++s) {
      const int start = std::clamp(s - kStencil / 2, 0, n - kStencil);
      const auto& w = stencil(s - start);
      auto flat = [&](int pos) {
        if (g.dim == 1) return static_cast<Eigen::Index>(slot(pos));
        return static_cast<Eigen::Index>(axis == 0 ? g.flatten(slot(pos), line) : g.flatten(line, slot(pos)));
      };
      const Eigen::Index target = flat(s);
      for (int k = 0; k < kStencil; ++k) out.row(target) += (w[k] / spacing) * A.row(flat(start + k));
    }
  }
  return out;
}

}  // namespace

void require_dense_size(const PhaseSpaceContext& ctx, const char* what) {
  const int lim = ctx.dim() == 1 ? kMaxDenseN1 : kMaxDenseN2;
  if (ctx.n() > lim)
    throw SizeLimit(std::string(what) + ": dense phase-space kernels limited to N <= " + std::to_string(lim) +
                    " per axis in " + std::to_string(ctx.dim()) + "-D");
}

Eigen::MatrixXcd weyl_matrix(const Symbol& a) {
  const auto& ctx = a.ctx;
  ctx.validate();
  require_dense_size(ctx, "weyl_matrix");
  require_finite(a.values, "weyl_matrix");
  const Grid& g = ctx.grid;
  const int d = g.dim, n = g.n;
  const auto sz = static_cast<double>(g.size());
  Eigen::MatrixXcd s = a.values;
  dft_columns(s, d, n, -1);
  s /= sz;
  dft_rows(s, d, n, +1);
  s.array() *= half_shift(g).array() / pow_d(g.length, d);
  dft_columns(s, d, n, +1);
  const double hd = pow_d(g.h(), d);
  Eigen::MatrixXcd m(s.rows(), s.cols());
  for (Eigen::Index j = 0; j < s.rows(); ++j)
    for (Eigen::Index r = 0; r < s.cols(); ++r)
      m(j, static_cast<Eigen::Index>(sub_index(g, j, r))) = s(j, r) * hd;
  return m;
}

GridFunction weyl_apply(const Symbol& a, const GridFunction& u) {
  require_same_context(a.ctx, u.ctx, "weyl_apply");
  require_finite(u.values, "weyl_apply");
  return GridFunction(u.ctx, weyl_matrix(a) * u.values);
}

Eigen::MatrixXcd kernel_from_symbol(const Symbol& a) {
  return weyl_matrix(a) / pow_d(a.ctx.h(), a.ctx.dim());
}

Symbol symbol_from_kernel(const Eigen::MatrixXcd& kernel, const PhaseSpaceContext& ctx) {
  ctx.validate();
  require_dense_size(ctx, "symbol_from_kernel");
  const auto sz = static_cast<Eigen::Index>(ctx.size());
  if (kernel.rows() != kernel.cols()) throw InvalidArgument("symbol_from_kernel: kernel must be square");
  if (kernel.rows() != sz) throw ContextMismatch("symbol_from_kernel: kernel size does not match the grid");
  require_finite(kernel, "symbol_from_kernel");
  const Grid& g = ctx.grid;
  const int d = g.dim, n = g.n;
  Eigen::MatrixXcd t(sz, sz);
  for (Eigen::Index j = 0; j < sz; ++j)
    for (Eigen::Index r = 0; r < sz; ++r) t(j, r) = kernel(j, static_cast<Eigen::Index>(sub_index(g, j, r)));
  dft_columns(t, d, n, -1);
  t /= static_cast<double>(sz);
  const Eigen::MatrixXcd c = half_shift(g);
  const double ld = pow_d(g.length, d);
  for (Eigen::Index q = 0; q < sz; ++q)
    for (Eigen::Index r = 0; r < sz; ++r)
      t(q, r) = std::abs(c(q, r)) > 1e-12 ? t(q, r) * ld / c(q, r) : cplx(0.0);
  dft_rows(t, d, n, -1);
  t /= static_cast<double>(sz);
  dft_columns(t, d, n, +1);
  return Symbol(ctx, std::move(t));
}

Symbol power_spectrum_from_correlation(const Eigen::MatrixXcd& kernel, const PhaseSpaceContext& ctx) {
  Symbol s = symbol_from_kernel(kernel, ctx);
  s.values /= std::pow(2.0 * std::numbers::pi * ctx.epsilon, ctx.dim());
  return s;
}

WignerFunction wigner(const GridFunction& u) {
  const auto& ctx = u.ctx;
  ctx.validate();
  require_dense_size(ctx, "wigner");
  const Grid& g = ctx.grid;
  const int d = g.dim, n = g.n;
  const auto sz = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXcd p(sz, sz);
  for (Eigen::Index j = 0; j < sz; ++j)
    for (Eigen::Index r = 0; r < sz; ++r)
      p(j, r) = std::conj(u.values(j)) * u.values(static_cast<Eigen::Index>(sub_index(g, j, r)));
  dft_columns(p, d, n, +1);
  p.array() *= half_shift(g).array();
  dft_rows(p, d, n, +1);
  dft_columns(p, d, n, -1);
  const double scale = 1.0 / (static_cast<double>(sz) * static_cast<double>(sz) * pow_d(ctx.dxi(), d));
  WignerFunction w{ctx, p.real() * scale};
  return w;
}

Eigen::VectorXd position_marginal(const WignerFunction& w) {
  return w.values.rowwise().sum() * pow_d(w.ctx.dxi(), w.ctx.dim());
}

Eigen::VectorXd frequency_marginal(const WignerFunction& w) {
  return w.values.colwise().sum().transpose() * pow_d(w.ctx.h(), w.ctx.dim());
}

Eigen::VectorXcd eps_fourier(const GridFunction& u) {
  const auto& ctx = u.ctx;
  Eigen::VectorXcd v = u.values;
  detail::dft_vector(v, ctx.dim(), ctx.n(), -1);
  const int d = ctx.dim();
  v *= pow_d(ctx.h(), d) / std::pow(2.0 * std::numbers::pi * ctx.epsilon, 0.5 * d);
  return v;
}

cplx phase_space_pairing(const Symbol& a, const WignerFunction& w) {
  require_same_context(a.ctx, w.ctx, "phase_space_pairing");
  return (a.values.array() * w.values.array().cast<cplx>()).sum() * a.ctx.cell_volume();
}

Symbol symbol_derivative(const Symbol& a, int axis, bool wrt_xi) {
  const auto& ctx = a.ctx;
  const Grid& g = ctx.grid;
  if (axis < 0 || axis >= g.dim) throw InvalidArgument("symbol_derivative: axis out of range");
  if (!wrt_xi) return Symbol(ctx, diff_rows(a.values, g, axis, g.h(), false));
  Eigen::MatrixXcd t = a.values.transpose();
  return Symbol(ctx, diff_rows(t, g, axis, ctx.dxi(), true).transpose());
}

Symbol poisson_bracket(const Symbol& a, const Symbol& b) {
  require_same_context(a.ctx, b.ctx, "poisson_bracket");
  Symbol out(a.ctx);
  for (int k = 0; k < a.ctx.dim(); ++k) {
    const Symbol ax = symbol_derivative(a, k, false), axi = symbol_derivative(a, k, true);
    const Symbol bx = symbol_derivative(b, k, false), bxi = symbol_derivative(b, k, true);
    out.values.array() += axi.values.array() * bx.values.array() - ax.values.array() * bxi.values.array();
  }
  return out;
}

std::size_t mirror_xi_index(const Grid& g, std::size_t m) {
  const auto mm = g.unflatten(m);
  return g.flatten(-mm[0], -mm[1]);
}

Symbol reflect_xi(const Symbol& a) {
  Symbol out(a.ctx);
  const auto sz = static_cast<Eigen::Index>(a.ctx.size());
  for (Eigen::Index m = 0; m < sz; ++m)
    out.values.col(m) = a.values.col(static_cast<Eigen::Index>(mirror_xi_index(a.ctx.grid, m)));
  return out;
}

}  // namespace semicorr
