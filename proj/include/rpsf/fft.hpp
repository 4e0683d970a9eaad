#pragma once

#include <complex>
#include <cstddef>
#include <new>
#include <span>

#include <fftw3.h>

namespace rpsf {

// FFTW planning is not thread-safe; every plan in the library is created and
// destroyed under one process-wide lock. Plans use FFTW_ESTIMATE so results
// do not depend on run-time measurements.

/// Owning, aligned buffer for FFTW.
template <typename T>
class FftwBuffer {
 public:
  FftwBuffer() = default;
  explicit FftwBuffer(std::size_t n) : size_(n), ptr_(static_cast<T*>(fftw_malloc(sizeof(T) * n))) {
    if (!ptr_ && n > 0) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr_); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  FftwBuffer(FftwBuffer&& o) noexcept : size_(o.size_), ptr_(o.ptr_) {
    o.ptr_ = nullptr;
    o.size_ = 0;
  }
  FftwBuffer& operator=(FftwBuffer&& o) noexcept {
    if (this != &o) {
      fftw_free(ptr_);
      ptr_ = o.ptr_;
      size_ = o.size_;
      o.ptr_ = nullptr;
      o.size_ = 0;
    }
    return *this;
  }

  T* data() { return ptr_; }
  const T* data() const { return ptr_; }
  std::size_t size() const { return size_; }
  T& operator[](std::size_t i) { return ptr_[i]; }
  const T& operator[](std::size_t i) const { return ptr_[i]; }
  std::span<T> span() { return {ptr_, size_}; }
  std::span<const T> span() const { return {ptr_, size_}; }

 private:
  std::size_t size_ = 0;
  T* ptr_ = nullptr;
};

using Complex = std::complex<double>;

/// In-place unnormalized 2D complex DFT on an n0 x n1 row-major grid.
/// Sign -1 is FFTW_FORWARD, +1 is FFTW_BACKWARD.
class ComplexFft2 {
 public:
  ComplexFft2(int n0, int n1, int sign);
  ~ComplexFft2();
  ComplexFft2(const ComplexFft2&) = delete;
  ComplexFft2& operator=(const ComplexFft2&) = delete;

  int n0() const { return n0_; }
  int n1() const { return n1_; }
  std::span<Complex> buffer() {
    return {reinterpret_cast<Complex*>(buf_.data()), buf_.size()};
  }
  void execute();

 private:
  int n0_;
  int n1_;
  FftwBuffer<fftw_complex> buf_;
  fftw_plan plan_ = nullptr;
};

/// Unnormalized real-to-complex / complex-to-real 3D DFT pair on an
/// n0 x n1 x n2 row-major grid. The half spectrum has n0 x n1 x (n2/2+1)
/// entries. inverse() does not divide by the grid size.
class RealFft3 {
 public:
  RealFft3(int n0, int n1, int n2);
  ~RealFft3();
  RealFft3(const RealFft3&) = delete;
  RealFft3& operator=(const RealFft3&) = delete;

  std::size_t real_size() const { return real_.size(); }
  std::size_t spectrum_size() const { return spec_.size(); }

  /// in has real_size() entries, out has spectrum_size() entries.
  void forward(std::span<const double> in, std::span<Complex> out);
  /// in has spectrum_size() entries, out has real_size() entries.
  void inverse(std::span<const Complex> in, std::span<double> out);

 private:
  FftwBuffer<double> real_;
  FftwBuffer<fftw_complex> spec_;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

/// 2D counterpart of RealFft3: n0 x (n1/2+1) half spectrum.
class RealFft2 {
 public:
  RealFft2(int n0, int n1);
  ~RealFft2();
  RealFft2(const RealFft2&) = delete;
  RealFft2& operator=(const RealFft2&) = delete;

  std::size_t real_size() const { return real_.size(); }
  std::size_t spectrum_size() const { return spec_.size(); }

  void forward(std::span<const double> in, std::span<Complex> out);
  void inverse(std::span<const Complex> in, std::span<double> out);

 private:
  FftwBuffer<double> real_;
  FftwBuffer<fftw_complex> spec_;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

}  // namespace rpsf
