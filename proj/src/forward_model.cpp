#include "rpsf/forward_model.hpp"

#include <algorithm>
#include <numbers>

#include "rpsf/error.hpp"

namespace rpsf {

Volume kernel_volume(const PsfStack& dict) {
  const int m = dict.rows();
  const int n = dict.cols();
  const int d = dict.depth();
  if (d < 1) throw ShapeError("empty dictionary");
  Volume kernel(m, n, d);
  // Dictionary slices are centred on (m/2, n/2); the kernel is centred on the
  // origin, and slice k sits at depth offset d-1-k so that it lands in the
  // last output slice when convolved with X(:, :, k).
  for (int k = 0; k < d; ++k) {
    const Image& s = dict.slices[k];
    if (s.rows() != m || s.cols() != n) throw ShapeError("dictionary slice has the wrong shape");
    const int kk = d - 1 - k;
    for (int i = 0; i < m; ++i) {
      const int si = (i + m / 2) % m;
      for (int j = 0; j < n; ++j) kernel(i, j, kk) = s(si, (j + n / 2) % n);
    }
  }
  return kernel;
}

ForwardOperator::ForwardOperator(const PsfStack& dict) : ForwardOperator(kernel_volume(dict)) {}

ForwardOperator::ForwardOperator(const Volume& kernel)
    : rows_(kernel.rows()), cols_(kernel.cols()), depth_(kernel.depth()) {
  if (kernel.size() == 0) throw ShapeError("empty convolution kernel");
  // Volumes store depth outermost.
  fft_ = std::make_unique<RealFft3>(depth_, rows_, cols_);
  fft2_ = std::make_unique<RealFft2>(rows_, cols_);
  kernel_hat_.resize(fft_->spectrum_size());
  plane_.resize(fft2_->spectrum_size());
  slice_buf_.resize(fft2_->real_size());
  for (int kz = 0; kz < depth_; ++kz)
    phase_.push_back(std::polar(1.0, -2.0 * std::numbers::pi * kz * (depth_ - 1) / depth_));
  scratch_.resize(fft_->spectrum_size());
  fft_->forward(kernel.values(), kernel_hat_);
}

void ForwardOperator::check(const Volume& vol) const {
  if (vol.rows() != rows_ || vol.cols() != cols_ || vol.depth() != depth_)
    throw ShapeError("volume shape does not match the convolution kernel");
}

void ForwardOperator::transform(const Volume& vol, std::span<Complex> out) {
  check(vol);
  if (out.size() != spectrum_size()) throw ShapeError("spectrum buffer has the wrong size");
  fft_->forward(vol.values(), out);
}

void ForwardOperator::inverse_transform(std::span<const Complex> spec, Volume& out) {
  check(out);
  if (spec.size() != spectrum_size()) throw ShapeError("spectrum buffer has the wrong size");
  fft_->inverse(spec, out.values());
  out *= 1.0 / static_cast<double>(out.size());
}

// The 3D half spectrum is laid out depth x rows x (cols/2+1), so each depth
// frequency holds one 2D half spectrum.

void ForwardOperator::last_slice(std::span<const Complex> spec, Image& out) {
  if (spec.size() != spectrum_size()) throw ShapeError("spectrum buffer has the wrong size");
  if (out.rows() != rows_ || out.cols() != cols_) throw ShapeError("slice has the wrong shape");
  const std::size_t plane = plane_.size();
  std::fill(plane_.begin(), plane_.end(), Complex(0.0));
  for (int kz = 0; kz < depth_; ++kz) {
    const Complex w = std::conj(phase_[kz]);
    const Complex* s = spec.data() + kz * plane;
    for (std::size_t p = 0; p < plane; ++p) plane_[p] += w * s[p];
  }
  fft2_->inverse(plane_, out.values());
  const double scale = 1.0 / (static_cast<double>(rows_) * cols_ * depth_);
  for (double& v : out.values()) v *= scale;
}

void ForwardOperator::add_last_slice(const Image& slice, std::span<Complex> spec) {
  if (spec.size() != spectrum_size()) throw ShapeError("spectrum buffer has the wrong size");
  if (slice.rows() != rows_ || slice.cols() != cols_) throw ShapeError("slice has the wrong shape");
  fft2_->forward(slice.values(), plane_);
  const std::size_t plane = plane_.size();
  for (int kz = 0; kz < depth_; ++kz) {
    const Complex w = phase_[kz];
    Complex* s = spec.data() + kz * plane;
    for (std::size_t p = 0; p < plane; ++p) s[p] += w * plane_[p];
  }
}

double ForwardOperator::norm2(std::span<const Complex> spec) const {
  // Half-spectrum columns other than 0 and cols/2 stand for two entries.
  const int half = cols_ / 2 + 1;
  double total = 0.0;
  for (std::size_t r = 0; r < spec.size() / half; ++r) {
    const Complex* s = spec.data() + r * half;
    for (int c = 0; c < half; ++c) {
      const bool single = c == 0 || (cols_ % 2 == 0 && c == cols_ / 2);
      total += (single ? 1.0 : 2.0) * std::norm(s[c]);
    }
  }
  return total / (static_cast<double>(rows_) * cols_ * depth_);
}

Volume ForwardOperator::apply(const Volume& vol) {
  transform(vol, scratch_);
  for (std::size_t i = 0; i < scratch_.size(); ++i) scratch_[i] *= kernel_hat_[i];
  Volume out(rows_, cols_, depth_);
  inverse_transform(scratch_, out);
  return out;
}

Volume ForwardOperator::adjoint(const Volume& vol) {
  transform(vol, scratch_);
  for (std::size_t i = 0; i < scratch_.size(); ++i) scratch_[i] *= std::conj(kernel_hat_[i]);
  Volume out(rows_, cols_, depth_);
  inverse_transform(scratch_, out);
  return out;
}

Volume conv3(const PsfStack& dict, const Volume& vol) {
  ForwardOperator op(dict);
  return op.apply(vol);
}

}  // namespace rpsf
