#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rpsf/optics.hpp"
#include "rpsf/tensor.hpp"

namespace rpsf {

/// Ground-truth emitter. x runs along image rows, y along columns; zeta is the
/// defocus phase in radians.
struct PointSource {
  double x = 0.0;
  double y = 0.0;
  double zeta = 0.0;
  double flux = 0.0;
};

struct Scene {
  std::vector<PointSource> sources;
  double background = 0.0;
  std::uint64_t seed = 0;
};

/// Photon counts recorded by the detector.
struct ObservedImage {
  int rows = 0;
  int cols = 0;
  std::vector<std::int64_t> counts;
  std::uint64_t seed = 0;

  std::int64_t operator()(int i, int j) const {
    return counts[static_cast<std::size_t>(i) * cols + j];
  }
  Image as_image() const;
  bool all_zero() const;
};

/// Sub-stream derivation for seeds (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct SceneOptions {
  /// Minimum distance of sources from the transverse borders, pixels.
  double edge_margin = 2.0;
  /// Poisson-distributed fluxes around flux_mean when false.
  bool fixed_flux = false;
};

/// M sources drawn uniformly in [margin, rows - margin] x [margin, cols - margin]
/// x [zeta_min + dzeta/2, zeta_max - dzeta/2], with Poisson(flux_mean) fluxes.
/// Random numbers come from std::mt19937_64 seeded with `seed`.
Scene random_scene(int num_sources, const OpticsConfig& cfg, double flux_mean,
                   double background, std::uint64_t seed, const SceneOptions& opts = {});

/// Noiseless image sum_i f_i H_i + b from the continuous optics model.
Image render(const Scene& scene, const OpticsConfig& cfg,
             const std::optional<MaskPerturbation>& perturbation = std::nullopt);

/// Independent Poisson draw per pixel with the pixel value as mean.
ObservedImage sample_poisson(const Image& mean, std::uint64_t seed);

}  // namespace rpsf
