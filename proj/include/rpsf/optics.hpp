#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "rpsf/fft.hpp"
#include "rpsf/tensor.hpp"

namespace rpsf {

/// Geometry of the rotating-PSF imager and of its discrete depth dictionary.
///
/// Pupil coordinates are in units of the pupil radius R, image coordinates in
/// units of lambda * z_I / R. The pupil plane is sampled on a pupil_grid x
/// pupil_grid lattice spanning aperture_side radii, so the image-plane pitch
/// is 1 / aperture_side.
struct OpticsConfig {
  int num_zones = 7;
  int rows = 96;
  int cols = 96;
  /// 0 selects the default: the smallest common multiple of rows and cols
  /// that is at least 4 * max(rows, cols).
  int pupil_grid = 0;
  double aperture_side = 4.0;
  double image_pixel_pitch = 0.25;
  int num_slices = 21;
  double zeta_min = -21.0;
  double zeta_max = 21.0;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  int effective_pupil_grid() const;
  /// Spacing between dictionary slices; 0 when there is a single slice.
  double zeta_spacing() const;
  /// Defocus of a (possibly fractional) slice index.
  double zeta_at(double slice) const;
  /// Inverse of zeta_at.
  double slice_of(double zeta) const;
};

struct MaskPerturbation {
  double sigma = 0.0;  // radians
  std::uint64_t seed = 0;
};

/// The discrete dictionary: slice k is the unit-flux PSF at defocus zetas[k],
/// centred on pixel (rows/2, cols/2).
struct PsfStack {
  OpticsConfig config;
  std::vector<Image> slices;
  std::vector<double> zetas;
  std::vector<double> per_slice_energy;

  int rows() const { return config.rows; }
  int cols() const { return config.cols; }
  int depth() const { return static_cast<int>(slices.size()); }
};

/// Spiral phase l * angle for a pupil point at normalized radius u_radius,
/// where l is the annular zone index. Zones are half-open
/// [sqrt((l-1)/L), sqrt(l/L)); the rim u_radius = 1 belongs to zone L.
double spiral_phase(double u_radius, double u_angle, int num_zones);

/// Zone index in [1, num_zones] for a pupil radius in [0, 1].
int spiral_zone(double u_radius, int num_zones);

/// Defocus phase for an object displaced delta_z from the in-focus plane at
/// distance l0, for pupil radius R and wavelength lambda (consistent units).
double zeta_of_defocus(double delta_z, double pupil_radius, double wavelength, double l0);

/// Reusable evaluator of the single-lobe PSF for one optics configuration.
///
/// The field is the unnormalized inverse DFT of the pupil function
/// exp(i(zeta u^2 - psi(u) - 2 pi u.s0 + sigma n(u))) over the pupil grid. The
/// intensity is folded periodically onto the rows x cols detector, which keeps
/// all energy and makes pixel translations exact circular shifts. Intensities
/// are divided by the energy of the unperturbed in-focus PSF.
///
/// Not thread-safe: each thread needs its own instance.
class PupilModel {
 public:
  explicit PupilModel(const OpticsConfig& cfg);

  const OpticsConfig& config() const { return cfg_; }
  int grid() const { return grid_; }

  /// PSF centred at (rows/2 + dx, cols/2 + dy) pixels.
  Image slice(double zeta, double dx, double dy,
              const MaskPerturbation* perturbation = nullptr);

  /// Adds flux * PSF centred at (rows/2 + dx, cols/2 + dy) into out.
  void accumulate(Image& out, double flux, double zeta, double dx, double dy,
                  const MaskPerturbation* perturbation = nullptr);

 private:
  struct Sample {
    std::size_t index;  // row-major position in the pupil grid
    double ux;
    double uy;
    double r2;
    double spiral;
  };

  const std::vector<double>& phase_noise(const MaskPerturbation& p);

  OpticsConfig cfg_;
  int grid_;
  double energy_;
  std::vector<Sample> samples_;
  std::unique_ptr<ComplexFft2> fft_;
  std::optional<std::uint64_t> noise_seed_;
  std::vector<double> noise_;
};

/// One PSF image; see PupilModel::slice.
Image psf_slice(double zeta, double dx, double dy, const OpticsConfig& cfg,
                const std::optional<MaskPerturbation>& perturbation = std::nullopt);

/// Dictionary of num_slices unperturbed, centred PSFs on a uniform zeta grid.
PsfStack build_dictionary(const OpticsConfig& cfg);

}  // namespace rpsf
