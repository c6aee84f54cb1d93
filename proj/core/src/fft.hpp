#pragma once

#include <complex>
#include <memory>

#include <Eigen/Dense>
#include <fftw3.h>

namespace semicorr::detail {

using cplx = std::complex<double>;

// Unnormalized in-place complex DFT of `howmany` n^dim grids laid out with the
// given element stride and distance. sign = -1 forward, +1 backward.
void dft(cplx* data, int dim, int n, int howmany, int stride, int dist, int sign);

inline void dft_columns(Eigen::MatrixXcd& m, int dim, int n, int sign) {
  dft(m.data(), dim, n, static_cast<int>(m.cols()), 1, static_cast<int>(m.rows()), sign);
}
inline void dft_rows(Eigen::MatrixXcd& m, int dim, int n, int sign) {
  dft(m.data(), dim, n, static_cast<int>(m.rows()), static_cast<int>(m.rows()), 1, sign);
}
inline void dft_vector(Eigen::VectorXcd& v, int dim, int n, int sign) {
  dft(v.data(), dim, n, 1, 1, 0, sign);
}

// Persistent batched real<->complex plan pair over fixed buffers. Used in the
// time-stepping hot loop where per-call planning would dominate.
class RealFftBatch {
 public:
  RealFftBatch(int dim, int n, int howmany);
  ~RealFftBatch();
  RealFftBatch(const RealFftBatch&) = delete;
  RealFftBatch& operator=(const RealFftBatch&) = delete;

  int spectral_size() const { return spec_; }  // complex points per grid
  int real_size() const { return real_; }
  double* real_buffer() { return rbuf_; }
  cplx* spectral_buffer() { return reinterpret_cast<cplx*>(cbuf_); }
  void forward();   // real_buffer -> spectral_buffer
  void backward();  // spectral_buffer -> real_buffer (unnormalized)

 private:
  int real_ = 0, spec_ = 0, howmany_ = 0;
  double* rbuf_ = nullptr;
  fftw_complex* cbuf_ = nullptr;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

}  // namespace semicorr::detail
