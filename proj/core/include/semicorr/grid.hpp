#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace semicorr {

using cplx = std::complex<double>;

// Periodic grid: n points per axis on [0, length)^dim, x_j = j*h.
struct Grid {
  int dim = 1;
  int n = 0;
  double length = 1.0;

  double h() const { return length / n; }
  std::size_t size() const;
  // Signed FFT index of slot m (m < n/2 ? m : m - n).
  int signed_index(int m) const { return m < n / 2 ? m : m - n; }
  // Angular wavenumber 2*pi*k/L of FFT slot m.
  double wavenumber(int m) const;
  // Position of node (i0[, i1]) along an axis.
  double coord(int i) const { return i * h(); }
  // Multi-index of a flat node index; axis 0 varies slowest.
  std::array<int, 2> unflatten(std::size_t idx) const;
  std::size_t flatten(int i0, int i1 = 0) const;
  Eigen::Vector2d position(std::size_t idx) const;
  // Nearest node (with periodic wrap) to a point; second axis ignored in 1-D.
  std::size_t nearest_node(const Eigen::Vector2d& x) const;
  // Periodic displacement b - a reduced to [-L/2, L/2) per axis.
  Eigen::Vector2d wrap_delta(const Eigen::Vector2d& a, const Eigen::Vector2d& b) const;

  void validate() const;
  bool operator==(const Grid&) const = default;
};

// Grid plus semiclassical scale. Phase-space nodes are (x_j, xi_m) with
// xi_m = eps * wavenumber(m), stored in FFT order.
struct PhaseSpaceContext {
  Grid grid;
  double epsilon = 0.1;

  PhaseSpaceContext() = default;
  PhaseSpaceContext(int dim, int n, double length, double eps);

  int dim() const { return grid.dim; }
  int n() const { return grid.n; }
  double h() const { return grid.h(); }
  std::size_t size() const { return grid.size(); }
  double dxi() const;
  // Frequency coordinate of FFT slot m along one axis.
  double xi(int m) const { return epsilon * grid.wavenumber(m); }
  Eigen::Vector2d xi_vector(std::size_t idx) const;
  // Phase-space cell volume (h * dxi)^d.
  double cell_volume() const;

  // Checks the resolution rules: n power of two, eps > 0, h <= eps.
  void validate() const;
  bool operator==(const PhaseSpaceContext&) const = default;
};

// Complex samples on the spatial grid.
struct GridFunction {
  PhaseSpaceContext ctx;
  Eigen::VectorXcd values;

  GridFunction() = default;
  explicit GridFunction(const PhaseSpaceContext& c);
  GridFunction(const PhaseSpaceContext& c, Eigen::VectorXcd v);
};

// Values a(x_j, xi_m); rows are x nodes, columns xi slots (FFT order).
struct Symbol {
  PhaseSpaceContext ctx;
  Eigen::MatrixXcd values;

  Symbol() = default;
  explicit Symbol(const PhaseSpaceContext& c);
  Symbol(const PhaseSpaceContext& c, Eigen::MatrixXcd v);

  // Fills from a callable f(x, xi) -> complex (or real).
  template <class F>
  static Symbol sample(const PhaseSpaceContext& c, F&& f) {
    Symbol s(c);
    const std::size_t sz = c.size();
    std::vector<Eigen::Vector2d> xis(sz);
    for (std::size_t m = 0; m < sz; ++m) xis[m] = c.xi_vector(m);
    for (std::size_t j = 0; j < sz; ++j) {
      const Eigen::Vector2d x = c.grid.position(j);
      for (std::size_t m = 0; m < sz; ++m) s.values(j, m) = f(x, xis[m]);
    }
    return s;
  }

  bool is_real(double tol = 0.0) const;
};

// Real phase-space density, same layout as Symbol.
struct WignerFunction {
  PhaseSpaceContext ctx;
  Eigen::MatrixXd values;
};

void require_same_context(const PhaseSpaceContext& a, const PhaseSpaceContext& b, const char* what);
void require_finite(const Eigen::Ref<const Eigen::MatrixXcd>& m, const char* what);
void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what);

}  // namespace semicorr
