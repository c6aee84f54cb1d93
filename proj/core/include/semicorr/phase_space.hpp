#pragma once

#include "semicorr/grid.hpp"

namespace semicorr {

// Largest grids accepted by dense phase-space operations.
inline constexpr int kMaxDenseN1 = 512;
inline constexpr int kMaxDenseN2 = 64;
void require_dense_size(const PhaseSpaceContext& ctx, const char* what);

// Matrix of Op_eps(a) acting on nodal values. Midpoint evaluation is exact
// trigonometric interpolation, so real symbols give Hermitian matrices and
// Op(1) = I.
Eigen::MatrixXcd weyl_matrix(const Symbol& a);
GridFunction weyl_apply(const Symbol& a, const GridFunction& u);

// Integral kernel K(x_j, y_l) of Op_eps(a), i.e. weyl_matrix / h^d.
Eigen::MatrixXcd kernel_from_symbol(const Symbol& a);
// Exact discrete inverse of kernel_from_symbol. Identity / h^d maps to 1.
Symbol symbol_from_kernel(const Eigen::MatrixXcd& kernel, const PhaseSpaceContext& ctx);
// Power spectrum attached to a correlation kernel: (2 pi eps)^-d times the
// symbol, so a delta correlation maps to the flat level 1/(2 pi eps)^d.
Symbol power_spectrum_from_correlation(const Eigen::MatrixXcd& kernel, const PhaseSpaceContext& ctx);

// Discrete Wigner function, the exact dual of weyl_matrix:
//   h^d <Op(a)u, u> = sum_{j,m} a W h^d dxi^d.
WignerFunction wigner(const GridFunction& u);
// sum over xi of W dxi^d; equals |u|^2.
Eigen::VectorXd position_marginal(const WignerFunction& w);
// sum over x of W h^d; equals |F_eps u|^2 on the xi slots.
Eigen::VectorXd frequency_marginal(const WignerFunction& w);
// F_eps u(xi_m) = (2 pi eps)^{-d/2} h^d sum_j u_j e^{-i x_j xi_m / eps}.
Eigen::VectorXcd eps_fourier(const GridFunction& u);
// sum a W h^d dxi^d.
cplx phase_space_pairing(const Symbol& a, const WignerFunction& w);

// {a, b} = sum_j (da/dxi_j db/dx_j - da/dx_j db/dxi_j), by 8th-order finite
// differences on the sorted x and xi axes.
Symbol poisson_bracket(const Symbol& a, const Symbol& b);
// Partial derivative along x (wrt_xi = false) or xi, axis 0 or 1.
Symbol symbol_derivative(const Symbol& a, int axis, bool wrt_xi);

// b(x, xi) = a(x, -xi) on the grid (Nyquist slot maps to itself).
Symbol reflect_xi(const Symbol& a);
// Index of the slot holding -xi_m along every axis.
std::size_t mirror_xi_index(const Grid& g, std::size_t m);

}  // namespace semicorr
