#pragma once

#include <complex>
#include <span>

namespace slepqns::detail {

// Real transform of fixed length n with owned FFTW buffers and plans.
//   forward: X_j = sum_i x_i exp(-2 pi i ij/n), j = 0..n/2
//   inverse: x_i = sum_j X_j exp(+2 pi i ij/n) over the Hermitian extension
class RealFft {
 public:
  explicit RealFft(int n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }
  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  int n_;
  double* real_;
  void* spectrum_;
  void* forward_plan_;
  void* inverse_plan_;
};

// Complex transform of fixed length n; sign -1 for forward, +1 for backward.
class ComplexFft {
 public:
  explicit ComplexFft(int n);
  ~ComplexFft();
  ComplexFft(const ComplexFft&) = delete;
  ComplexFft& operator=(const ComplexFft&) = delete;

  int size() const { return n_; }
  void forward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out);
  void backward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out);

 private:
  int n_;
  void* buffer_;
  void* forward_plan_;
  void* backward_plan_;
};

}  // namespace slepqns::detail
