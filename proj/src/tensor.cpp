#include "rpsf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rpsf/error.hpp"

namespace rpsf {

Image::Image(int rows, int cols, double value)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, value) {
  if (rows < 0 || cols < 0) throw ShapeError("negative image extent");
}

double Image::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Image::max() const {
  return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

Volume::Volume(int rows, int cols, int depth, double value)
    : rows_(rows),
      cols_(cols),
      depth_(depth),
      data_(static_cast<std::size_t>(rows) * cols * depth, value) {
  if (rows < 0 || cols < 0 || depth < 0) throw ShapeError("negative volume extent");
}

double Volume::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Volume::max() const {
  return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

double Volume::min() const {
  return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

double Volume::norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

Volume& Volume::operator+=(const Volume& rhs) {
  if (!same_shape(rhs)) throw ShapeError("volume shape mismatch in +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
  return *this;
}

Volume& Volume::operator-=(const Volume& rhs) {
  if (!same_shape(rhs)) throw ShapeError("volume shape mismatch in -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
  return *this;
}

Volume& Volume::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Volume operator+(Volume lhs, const Volume& rhs) { return lhs += rhs; }
Volume operator-(Volume lhs, const Volume& rhs) { return lhs -= rhs; }
Volume operator*(double s, Volume v) { return v *= s; }

double distance(const Volume& a, const Volume& b) {
  if (!a.same_shape(b)) throw ShapeError("volume shape mismatch in distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

Image extract_last_slice(const Volume& vol) {
  Image img(vol.rows(), vol.cols());
  if (vol.depth() == 0) return img;
  const int k = vol.depth() - 1;
  for (int i = 0; i < vol.rows(); ++i)
    for (int j = 0; j < vol.cols(); ++j) img(i, j) = vol(i, j, k);
  return img;
}

Volume embed_last_slice(const Image& img, int depth) {
  if (depth < 1) throw ShapeError("embed_last_slice needs depth >= 1");
  Volume vol(img.rows(), img.cols(), depth);
  for (int i = 0; i < img.rows(); ++i)
    for (int j = 0; j < img.cols(); ++j) vol(i, j, depth - 1) = img(i, j);
  return vol;
}

}  // namespace rpsf
