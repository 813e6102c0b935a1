#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

#include "slepqns/errors.hpp"

namespace slepqns::detail {

namespace {

// FFTW's planner is not thread safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

RealFft::RealFft(int n) : n_(n) {
  if (n < 2) throw ParameterError("FFT length must be at least 2");
  std::lock_guard lock(planner_mutex());
  real_ = fftw_alloc_real(n);
  auto* spec = fftw_alloc_complex(n / 2 + 1);
  spectrum_ = spec;
  forward_plan_ = fftw_plan_dft_r2c_1d(n, real_, spec, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_1d(n, spec, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
  fftw_free(real_);
  fftw_free(spectrum_);
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
  std::fill(real_, real_ + n_, 0.0);
  std::copy_n(in.begin(), std::min<std::size_t>(in.size(), n_), real_);
  fftw_execute(static_cast<fftw_plan>(forward_plan_));
  const auto* spec = static_cast<const std::complex<double>*>(spectrum_);
  std::copy_n(spec, std::min<std::size_t>(out.size(), bins()), out.begin());
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
  auto* spec = static_cast<std::complex<double>*>(spectrum_);
  std::fill(spec, spec + bins(), std::complex<double>(0.0, 0.0));
  std::copy_n(in.begin(), std::min<std::size_t>(in.size(), bins()), spec);
  // c2r overwrites its input; the buffer is refilled on every call.
  fftw_execute(static_cast<fftw_plan>(inverse_plan_));
  std::copy_n(real_, std::min<std::size_t>(out.size(), n_), out.begin());
}

ComplexFft::ComplexFft(int n) : n_(n) {
  if (n < 1) throw ParameterError("FFT length must be positive");
  std::lock_guard lock(planner_mutex());
  auto* buf = fftw_alloc_complex(n);
  buffer_ = buf;
  forward_plan_ = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  backward_plan_ = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
}

ComplexFft::~ComplexFft() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(backward_plan_));
  fftw_free(buffer_);
}

void ComplexFft::forward(std::span<const std::complex<double>> in,
                         std::span<std::complex<double>> out) {
  auto* buf = static_cast<std::complex<double>*>(buffer_);
  std::fill(buf, buf + n_, std::complex<double>(0.0, 0.0));
  std::copy_n(in.begin(), std::min<std::size_t>(in.size(), n_), buf);
  fftw_execute(static_cast<fftw_plan>(forward_plan_));
  std::copy_n(buf, std::min<std::size_t>(out.size(), n_), out.begin());
}

void ComplexFft::backward(std::span<const std::complex<double>> in,
                          std::span<std::complex<double>> out) {
  auto* buf = static_cast<std::complex<double>*>(buffer_);
  std::fill(buf, buf + n_, std::complex<double>(0.0, 0.0));
  std::copy_n(in.begin(), std::min<std::size_t>(in.size(), n_), buf);
  fftw_execute(static_cast<fftw_plan>(backward_plan_));
  std::copy_n(buf, std::min<std::size_t>(out.size(), n_), out.begin());
}

}  // namespace slepqns::detail
