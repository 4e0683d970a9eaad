#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rpsf {

/// Dense row-major m x n real image. Index (i, j) maps to i * cols + j.
class Image {
 public:
  Image() = default;
  Image(int rows, int cols, double value = 0.0);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double sum() const;
  double max() const;

  bool same_shape(const Image& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Dense m x n x d real volume stored slice by slice, so (i, j, k) maps to
/// (k * m + i) * n + j.
class Volume {
 public:
  Volume() = default;
  Volume(int rows, int cols, int depth, double value = 0.0);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int depth() const { return depth_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * rows_ + i) * cols_ + j;
  }
  double& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
  double operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }
  double& operator[](std::size_t idx) { return data_[idx]; }
  double operator[](std::size_t idx) const { return data_[idx]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Volume& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && depth_ == other.depth_;
  }

  double sum() const;
  double max() const;
  double min() const;
  double norm() const;

  Volume& operator+=(const Volume& rhs);
  Volume& operator-=(const Volume& rhs);
  Volume& operator*=(double s);

 private:
  int rows_ = 0;
  int cols_ = 0;
  int depth_ = 0;
  std::vector<double> data_;
};

Volume operator+(Volume lhs, const Volume& rhs);
Volume operator-(Volume lhs, const Volume& rhs);
Volume operator*(double s, Volume v);

/// Frobenius norm of a - b.
double distance(const Volume& a, const Volume& b);

/// Slice k = depth - 1 of the volume.
Image extract_last_slice(const Volume& vol);

/// Adjoint of extract_last_slice: embeds the image in the last slice of a
/// zero volume of the given depth.
Volume embed_last_slice(const Image& img, int depth);

}  // namespace rpsf
