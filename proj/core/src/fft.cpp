#include "fft.hpp"

#include <algorithm>
#include <mutex>

#include "semicorr/error.hpp"

namespace semicorr::detail {

namespace {
// FFTW's planner is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

void dft(cplx* data, int dim, int n, int howmany, int stride, int dist, int sign) {
  if (howmany <= 0) return;
  int dims[2] = {n, n};
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_many_dft(dim, dims, howmany, p, nullptr, stride, dist, p, nullptr, stride, dist,
                              sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  if (!plan) throw NumericalError("fftw planning failed");
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plan);
}

RealFftBatch::RealFftBatch(int dim, int n, int howmany) : howmany_(howmany) {
  real_ = dim == 1 ? n : n * n;
  spec_ = dim == 1 ? n / 2 + 1 : n * (n / 2 + 1);
  int dims[2] = {n, n};
  std::lock_guard<std::mutex> lock(planner_mutex());
  rbuf_ = fftw_alloc_real(static_cast<std::size_t>(real_) * howmany);
  cbuf_ = fftw_alloc_complex(static_cast<std::size_t>(spec_) * howmany);
  fwd_ = fftw_plan_many_dft_r2c(dim, dims, howmany, rbuf_, nullptr, 1, real_, cbuf_, nullptr, 1, spec_,
                                FFTW_ESTIMATE);
  bwd_ = fftw_plan_many_dft_c2r(dim, dims, howmany, cbuf_, nullptr, 1, spec_, rbuf_, nullptr, 1, real_,
                                FFTW_ESTIMATE);
  if (!fwd_ || !bwd_) throw NumericalError("fftw planning failed");
  std::fill(rbuf_, rbuf_ + static_cast<std::size_t>(real_) * howmany, 0.0);
}

RealFftBatch::~RealFftBatch() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(fwd_);
  fftw_destroy_plan(bwd_);
  fftw_free(rbuf_);
  fftw_free(cbuf_);
}

void RealFftBatch::forward() { fftw_execute(fwd_); }
void RealFftBatch::backward() { fftw_execute(bwd_); }

}  // namespace semicorr::detail
