#pragma once

#include <memory>
#include <span>
#include <vector>

#include "rpsf/fft.hpp"
#include "rpsf/optics.hpp"
#include "rpsf/tensor.hpp"

namespace rpsf {

/// Convolution kernel for a dictionary, laid out so that the last slice of
/// kernel * X sums, over k, slice k of the dictionary translated to every
/// voxel of X(:, :, k). Volume slice k therefore holds sources at zetas[k],
/// and voxel (i, j) holds a source centred on pixel (i, j).
Volume kernel_volume(const PsfStack& dict);

/// Circular 3D convolution with a fixed kernel, evaluated with real FFTs.
/// Not thread-safe; each concurrent solve owns its own instance.
class ForwardOperator {
 public:
  explicit ForwardOperator(const PsfStack& dict);
  explicit ForwardOperator(const Volume& kernel);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int depth() const { return depth_; }
  std::size_t spectrum_size() const { return kernel_hat_.size(); }
  std::span<const Complex> kernel_spectrum() const { return kernel_hat_; }

  /// Unnormalized forward DFT of a volume.
  void transform(const Volume& vol, std::span<Complex> out);
  /// Inverse DFT including the 1/size normalization.
  void inverse_transform(std::span<const Complex> spec, Volume& out);

  /// Last depth slice of the volume whose spectrum is spec.
  void last_slice(std::span<const Complex> spec, Image& out);
  /// spec += spectrum of a volume that is zero except for its last slice.
  void add_last_slice(const Image& slice, std::span<Complex> spec);
  /// Squared Euclidean norm of the volume whose spectrum is spec.
  double norm2(std::span<const Complex> spec) const;

  /// kernel * vol
  Volume apply(const Volume& vol);
  /// Adjoint of apply: correlation with the kernel.
  Volume adjoint(const Volume& vol);

 private:
  void check(const Volume& vol) const;

  int rows_;
  int cols_;
  int depth_;
  std::unique_ptr<RealFft3> fft_;
  std::unique_ptr<RealFft2> fft2_;
  std::vector<Complex> kernel_hat_;
  std::vector<Complex> phase_;  // exp(-2 pi i kz (d-1) / d)
  std::vector<Complex> plane_;
  std::vector<double> slice_buf_;
  std::vector<Complex> scratch_;
};

/// kernel_volume(dict) * vol.
Volume conv3(const PsfStack& dict, const Volume& vol);

}  // namespace rpsf
