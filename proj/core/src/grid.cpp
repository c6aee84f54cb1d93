#include "semicorr/grid.hpp"

#include <cmath>
#include <numbers>

#include "semicorr/error.hpp"

namespace semicorr {

std::size_t Grid::size() const {
  const auto nn = static_cast<std::size_t>(n);
  return dim == 1 ? nn : nn * nn;
}

double Grid::wavenumber(int m) const { return 2.0 * std::numbers::pi * signed_index(m) / length; }

std::array<int, 2> Grid::unflatten(std::size_t idx) const {
  if (dim == 1) return {static_cast<int>(idx), 0};
  return {static_cast<int>(idx / n), static_cast<int>(idx % n)};
}

std::size_t Grid::flatten(int i0, int i1) const {
  auto wrap = [this](int i) { return ((i % n) + n) % n; };
  if (dim == 1) return static_cast<std::size_t>(wrap(i0));
  return static_cast<std::size_t>(wrap(i0)) * n + wrap(i1);
}

Eigen::Vector2d Grid::position(std::size_t idx) const {
  const auto ij = unflatten(idx);
  return {coord(ij[0]), dim == 2 ? coord(ij[1]) : 0.0};
}

std::size_t Grid::nearest_node(const Eigen::Vector2d& x) const {
  const int i0 = static_cast<int>(std::lround(x[0] / h()));
  const int i1 = dim == 2 ? static_cast<int>(std::lround(x[1] / h())) : 0;
  return flatten(i0, i1);
}

Eigen::Vector2d Grid::wrap_delta(const Eigen::Vector2d& a, const Eigen::Vector2d& b) const {
  Eigen::Vector2d d = b - a;
  for (int k = 0; k < dim; ++k) d[k] -= length * std::floor(d[k] / length + 0.5);
  if (dim == 1) d[1] = 0.0;
  return d;
}

void Grid::validate() const {
  if (dim != 1 && dim != 2) throw InvalidArgument("grid dimension must be 1 or 2");
  if (n < 4 || (n & (n - 1)) != 0) throw InvalidArgument("grid points per axis must be a power of two >= 4");
  if (!(length > 0.0) || !std::isfinite(length)) throw InvalidArgument("grid length must be positive");
}

PhaseSpaceContext::PhaseSpaceContext(int d, int nn, double len, double eps)
    : grid{d, nn, len}, epsilon(eps) {
  validate();
}

double PhaseSpaceContext::dxi() const { return 2.0 * std::numbers::pi * epsilon / grid.length; }

Eigen::Vector2d PhaseSpaceContext::xi_vector(std::size_t idx) const {
  const auto ij = grid.unflatten(idx);
  return {xi(ij[0]), grid.dim == 2 ? xi(ij[1]) : 0.0};
}

double PhaseSpaceContext::cell_volume() const { return std::pow(h() * dxi(), grid.dim); }

void PhaseSpaceContext::validate() const {
  grid.validate();
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be positive");
  if (grid.h() > epsilon * (1.0 + 1e-12))
    throw InvalidArgument("grid spacing h = L/N must not exceed epsilon");
}

GridFunction::GridFunction(const PhaseSpaceContext& c)
    : ctx(c), values(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(c.size()))) {}

GridFunction::GridFunction(const PhaseSpaceContext& c, Eigen::VectorXcd v) : ctx(c), values(std::move(v)) {
  if (values.size() != static_cast<Eigen::Index>(c.size()))
    throw InvalidArgument("grid function length must be N^d");
}

Symbol::Symbol(const PhaseSpaceContext& c) {
  ctx = c;
  const auto sz = static_cast<Eigen::Index>(c.size());
  values = Eigen::MatrixXcd::Zero(sz, sz);
}

Symbol::Symbol(const PhaseSpaceContext& c, Eigen::MatrixXcd v) : ctx(c), values(std::move(v)) {
  const auto sz = static_cast<Eigen::Index>(c.size());
  if (values.rows() != sz || values.cols() != sz) throw InvalidArgument("symbol must be N^d x N^d");
}

bool Symbol::is_real(double tol) const { return values.imag().cwiseAbs().maxCoeff() <= tol; }

void require_same_context(const PhaseSpaceContext& a, const PhaseSpaceContext& b, const char* what) {
  if (!(a == b)) throw ContextMismatch(std::string(what) + ": inputs live on different phase-space grids");
}

void require_finite(const Eigen::Ref<const Eigen::MatrixXcd>& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string(what) + ": non-finite input");
}

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string(what) + ": non-finite input");
}

}  // namespace semicorr
