#include "rpsf/fft.hpp"

#include <algorithm>
#include <mutex>

namespace rpsf {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

ComplexFft2::ComplexFft2(int n0, int n1, int sign)
    : n0_(n0), n1_(n1), buf_(static_cast<std::size_t>(n0) * n1) {
  std::lock_guard<std::mutex> lock(planner_mutex());
  plan_ = fftw_plan_dft_2d(n0, n1, buf_.data(), buf_.data(),
                           sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
}

ComplexFft2::~ComplexFft2() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plan_);
}

void ComplexFft2::execute() { fftw_execute(plan_); }

RealFft3::RealFft3(int n0, int n1, int n2)
    : real_(static_cast<std::size_t>(n0) * n1 * n2),
      spec_(static_cast<std::size_t>(n0) * n1 * (n2 / 2 + 1)) {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fwd_ = fftw_plan_dft_r2c_3d(n0, n1, n2, real_.data(), spec_.data(), FFTW_ESTIMATE);
  inv_ = fftw_plan_dft_c2r_3d(n0, n1, n2, spec_.data(), real_.data(), FFTW_ESTIMATE);
}

RealFft3::~RealFft3() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(fwd_);
  fftw_destroy_plan(inv_);
}

void RealFft3::forward(std::span<const double> in, std::span<Complex> out) {
  std::copy(in.begin(), in.end(), real_.data());
  fftw_execute(fwd_);
  const auto* s = reinterpret_cast<const Complex*>(spec_.data());
  std::copy(s, s + spec_.size(), out.begin());
}

void RealFft3::inverse(std::span<const Complex> in, std::span<double> out) {
  // c2r destroys its input, so the spectrum is always copied in first.
  std::copy(in.begin(), in.end(), reinterpret_cast<Complex*>(spec_.data()));
  fftw_execute(inv_);
  std::copy(real_.data(), real_.data() + real_.size(), out.begin());
}

RealFft2::RealFft2(int n0, int n1)
    : real_(static_cast<std::size_t>(n0) * n1), spec_(static_cast<std::size_t>(n0) * (n1 / 2 + 1)) {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fwd_ = fftw_plan_dft_r2c_2d(n0, n1, real_.data(), spec_.data(), FFTW_ESTIMATE);
  inv_ = fftw_plan_dft_c2r_2d(n0, n1, spec_.data(), real_.data(), FFTW_ESTIMATE);
}

RealFft2::~RealFft2() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(fwd_);
  fftw_destroy_plan(inv_);
}

void RealFft2::forward(std::span<const double> in, std::span<Complex> out) {
  std::copy(in.begin(), in.end(), real_.data());
  fftw_execute(fwd_);
  const auto* s = reinterpret_cast<const Complex*>(spec_.data());
  std::copy(s, s + spec_.size(), out.begin());
}

void RealFft2::inverse(std::span<const Complex> in, std::span<double> out) {
  std::copy(in.begin(), in.end(), reinterpret_cast<Complex*>(spec_.data()));
  fftw_execute(inv_);
  std::copy(real_.data(), real_.data() + real_.size(), out.begin());
}

}  // namespace rpsf
