#include "rpsf/scene.hpp"

#include <cmath>
#include <random>
#include <string>

#include "rpsf/error.hpp"

namespace rpsf {

Image ObservedImage::as_image() const {
  Image img(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) img(i, j) = static_cast<double>((*this)(i, j));
  return img;
}

bool ObservedImage::all_zero() const {
  for (auto c : counts)
    if (c != 0) return false;
  return true;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Scene random_scene(int num_sources, const OpticsConfig& cfg, double flux_mean,
                   double background, std::uint64_t seed, const SceneOptions& opts) {
  cfg.validate();
  if (num_sources < 0) throw ConfigError("number of sources must be >= 0");
  if (!(flux_mean > 0.0)) throw ConfigError("flux_mean must be > 0");
  if (!(background >= 0.0)) throw ConfigError("background must be >= 0");
  const double m = opts.edge_margin;
  if (2.0 * m >= cfg.rows || 2.0 * m >= cfg.cols)
    throw ConfigError("edge margin leaves no room for sources");

  const double half = 0.5 * cfg.zeta_spacing();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(m, cfg.rows - m);
  std::uniform_real_distribution<double> uy(m, cfg.cols - m);
  std::uniform_real_distribution<double> uz(cfg.zeta_min + half, cfg.zeta_max - half);
  std::poisson_distribution<long long> flux(flux_mean);

  Scene scene;
  scene.background = background;
  scene.seed = seed;
  for (int s = 0; s < num_sources; ++s) {
    PointSource p;
    p.x = ux(rng);
    p.y = uy(rng);
    p.zeta = cfg.num_slices > 1 ? uz(rng) : cfg.zeta_min;
    p.flux = opts.fixed_flux ? flux_mean : static_cast<double>(flux(rng));
    scene.sources.push_back(p);
  }
  return scene;
}

Image render(const Scene& scene, const OpticsConfig& cfg,
             const std::optional<MaskPerturbation>& perturbation) {
  cfg.validate();
  if (scene.background < 0.0) throw ConfigError("background must be >= 0");
  Image img(cfg.rows, cfg.cols, 0.0);
  if (!scene.sources.empty()) {
    PupilModel model(cfg);
    const double lo = std::min(cfg.zeta_min, cfg.zeta_max);
    const double hi = std::max(cfg.zeta_min, cfg.zeta_max);
    for (std::size_t s = 0; s < scene.sources.size(); ++s) {
      const PointSource& p = scene.sources[s];
      if (!(p.x >= 0.0 && p.x < cfg.rows && p.y >= 0.0 && p.y < cfg.cols && p.zeta >= lo &&
            p.zeta <= hi))
        throw DomainError("source " + std::to_string(s) + " lies outside the imaged volume");
      if (!(p.flux >= 0.0)) throw DomainError("source " + std::to_string(s) + " has negative flux");
      model.accumulate(img, p.flux, p.zeta, p.x - cfg.rows / 2, p.y - cfg.cols / 2,
                       perturbation ? &*perturbation : nullptr);
    }
  }
  for (double& v : img.values()) v += scene.background;
  return img;
}

ObservedImage sample_poisson(const Image& mean, std::uint64_t seed) {
  ObservedImage out;
  out.rows = mean.rows();
  out.cols = mean.cols();
  out.seed = seed;
  out.counts.resize(mean.size());
  std::mt19937_64 rng(seed);
  const auto vals = mean.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double lambda = vals[i];
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw DomainError("Poisson mean must be finite and >= 0 (pixel " + std::to_string(i) + ")");
    if (lambda == 0.0) {
      out.counts[i] = 0;
      continue;
    }
    std::poisson_distribution<std::int64_t> dist(lambda);
    out.counts[i] = dist(rng);
  }
  return out;
}

}  // namespace rpsf
