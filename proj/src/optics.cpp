#include "rpsf/optics.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "rpsf/error.hpp"

namespace rpsf {

void OpticsConfig::validate() const {
  if (num_zones < 1) throw ConfigError("num_zones must be >= 1");
  if (rows < 1 || cols < 1) throw ConfigError("image size must be >= 1");
  if (num_slices < 1) throw ConfigError("num_slices must be >= 1");
  if (pupil_grid < 0) throw ConfigError("pupil_grid must be >= 1 (or 0 for default)");
  if (!(aperture_side >= 2.0)) throw ConfigError("aperture_side must be >= 2 pupil radii");
  if (!(image_pixel_pitch > 0.0)) throw ConfigError("image_pixel_pitch must be > 0");
  if (std::abs(image_pixel_pitch * aperture_side - 1.0) > 1e-12)
    throw ConfigError("image_pixel_pitch must equal 1 / aperture_side");
  if (num_slices == 1) {
    if (zeta_min > zeta_max) throw ConfigError("zeta_min must not exceed zeta_max");
  } else if (!(zeta_min < zeta_max)) {
    throw ConfigError("zeta_min must be < zeta_max");
  }
  const int grid = effective_pupil_grid();
  if (grid % rows != 0 || grid % cols != 0)
    throw ConfigError("pupil_grid must be a multiple of both image dimensions");
  // The unit pupil must be sampled by at least a few points per radius.
  if (grid / aperture_side < 2.0) throw ConfigError("pupil_grid too coarse for the pupil");
}

int OpticsConfig::effective_pupil_grid() const {
  if (pupil_grid > 0) return pupil_grid;
  const int base = std::lcm(rows, cols);
  const int target = 4 * std::max(rows, cols);
  return ((target + base - 1) / base) * base;
}

double OpticsConfig::zeta_spacing() const {
  return num_slices > 1 ? (zeta_max - zeta_min) / (num_slices - 1) : 0.0;
}

double OpticsConfig::zeta_at(double slice) const { return zeta_min + slice * zeta_spacing(); }

double OpticsConfig::slice_of(double zeta) const {
  const double dz = zeta_spacing();
  return dz > 0.0 ? (zeta - zeta_min) / dz : 0.0;
}

int spiral_zone(double u_radius, int num_zones) {
  if (num_zones < 1) throw DomainError("num_zones must be >= 1");
  if (!(u_radius >= 0.0)) throw DomainError("negative pupil radius");
  if (u_radius > 1.0) throw DomainError("point lies outside the unit pupil");
  int zone = 1;
  for (int l = 1; l < num_zones; ++l) {
    if (u_radius >= std::sqrt(static_cast<double>(l) / num_zones)) zone = l + 1;
  }
  return zone;
}

double spiral_phase(double u_radius, double u_angle, int num_zones) {
  return spiral_zone(u_radius, num_zones) * u_angle;
}

double zeta_of_defocus(double delta_z, double pupil_radius, double wavelength, double l0) {
  if (!(l0 > 0.0)) throw DomainError("l0 must be positive");
  if (!(pupil_radius > 0.0)) throw DomainError("pupil radius must be positive");
  if (!(wavelength > 0.0)) throw DomainError("wavelength must be positive");
  if (!(l0 + delta_z > 0.0)) throw DomainError("object lies behind the lens (l0 + delta_z <= 0)");
  return -std::numbers::pi * delta_z * pupil_radius * pupil_radius /
         (wavelength * l0 * (l0 + delta_z));
}

PupilModel::PupilModel(const OpticsConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  grid_ = cfg_.effective_pupil_grid();
  const double du = cfg_.aperture_side / grid_;
  for (int q0 = 0; q0 < grid_; ++q0) {
    const double ux = (q0 < grid_ / 2 ? q0 : q0 - grid_) * du;
    if (std::abs(ux) > 1.0) continue;
    for (int q1 = 0; q1 < grid_; ++q1) {
      const double uy = (q1 < grid_ / 2 ? q1 : q1 - grid_) * du;
      const double r2 = ux * ux + uy * uy;
      if (r2 > 1.0) continue;
      const double r = std::sqrt(r2);
      samples_.push_back({static_cast<std::size_t>(q0) * grid_ + q1, ux, uy, r2,
                          spiral_phase(std::min(r, 1.0), std::atan2(uy, ux), cfg_.num_zones)});
    }
  }
  // Parseval: the unnormalized inverse DFT of a unit-modulus pupil carries
  // grid^2 * (pupil samples) of energy, whatever the phase. This is the total
  // of the folded in-focus PSF.
  energy_ = static_cast<double>(grid_) * grid_ * static_cast<double>(samples_.size());
  fft_ = std::make_unique<ComplexFft2>(grid_, grid_, +1);
}

const std::vector<double>& PupilModel::phase_noise(const MaskPerturbation& p) {
  if (!noise_seed_ || *noise_seed_ != p.seed) {
    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    noise_.resize(static_cast<std::size_t>(grid_) * grid_);
    for (double& v : noise_) v = normal(rng);
    noise_seed_ = p.seed;
  }
  return noise_;
}

void PupilModel::accumulate(Image& out, double flux, double zeta, double dx, double dy,
                            const MaskPerturbation* perturbation) {
  if (out.rows() != cfg_.rows || out.cols() != cfg_.cols)
    throw ShapeError("PSF accumulation target has the wrong shape");
  if (perturbation && perturbation->sigma < 0.0) throw ConfigError("perturbation sigma must be >= 0");

  const std::vector<double>* noise = nullptr;
  if (perturbation && perturbation->sigma > 0.0) noise = &phase_noise(*perturbation);

  auto buf = fft_->buffer();
  std::fill(buf.begin(), buf.end(), Complex(0.0, 0.0));
  const double two_pi = 2.0 * std::numbers::pi;
  const double sx = dx * cfg_.image_pixel_pitch;
  const double sy = dy * cfg_.image_pixel_pitch;
  for (const Sample& s : samples_) {
    double phase = zeta * s.r2 - s.spiral - two_pi * (s.ux * sx + s.uy * sy);
    if (noise) phase += perturbation->sigma * (*noise)[s.index];
    buf[s.index] = std::polar(1.0, phase);
  }
  fft_->execute();

  const int m = cfg_.rows;
  const int n = cfg_.cols;
  const double scale = flux / energy_;
  for (int p0 = 0; p0 < grid_; ++p0) {
    const int r = (p0 + m / 2) % m;
    const Complex* row = buf.data() + static_cast<std::size_t>(p0) * grid_;
    for (int p1 = 0; p1 < grid_; ++p1) {
      const int c = (p1 + n / 2) % n;
      out(r, c) += scale * std::norm(row[p1]);
    }
  }
}

Image PupilModel::slice(double zeta, double dx, double dy, const MaskPerturbation* perturbation) {
  Image img(cfg_.rows, cfg_.cols);
  accumulate(img, 1.0, zeta, dx, dy, perturbation);
  return img;
}

Image psf_slice(double zeta, double dx, double dy, const OpticsConfig& cfg,
                const std::optional<MaskPerturbation>& perturbation) {
  PupilModel model(cfg);
  return model.slice(zeta, dx, dy, perturbation ? &*perturbation : nullptr);
}

PsfStack build_dictionary(const OpticsConfig& cfg) {
  PupilModel model(cfg);
  PsfStack stack;
  stack.config = cfg;
  for (int k = 0; k < cfg.num_slices; ++k) {
    const double zeta = cfg.zeta_at(k);
    stack.zetas.push_back(zeta);
    stack.slices.push_back(model.slice(zeta, 0.0, 0.0));
    stack.per_slice_energy.push_back(stack.slices.back().sum());
  }
  return stack;
}

}  // namespace rpsf
