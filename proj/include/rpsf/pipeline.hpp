#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rpsf/evaluate.hpp"
#include "rpsf/flux.hpp"
#include "rpsf/optics.hpp"
#include "rpsf/postproc.hpp"
#include "rpsf/scene.hpp"
#include "rpsf/solver.hpp"

namespace rpsf {

/// The four data-fit / regularizer combinations.
enum class Algorithm { KlNc, KlL1, L2L1, L2Nc };

std::string algorithm_name(Algorithm a);  // "kl-nc", "kl-l1", "l2-l1", "l2-nc"
Algorithm parse_algorithm(const std::string& name);
const std::vector<Algorithm>& all_algorithms();

/// base with datafit and regularizer set for the algorithm.
SolverParams params_for(Algorithm a, SolverParams base);

struct PipelineOptions {
  ClusterTolerance cluster;
  double threshold_fraction = 0.05;
  bool refine_flux = true;
  int flux_max_iter = 100;
  double flux_tol = 1e-6;
};

struct PipelineResult {
  SolveResult solve;
  std::vector<Detection> raw;        // one per non-zero voxel
  std::vector<Detection> clustered;  // after centroiding and thresholding
  std::vector<Detection> refined;    // clustered, with fluxes from the KL scheme
  int flux_iterations = 0;
  /// Empty when flux refinement succeeded; otherwise why cluster fluxes were kept.
  std::string flux_note;
};

/// Solve, cluster, threshold, and refine fluxes for one observed image.
PipelineResult run_pipeline(const ObservedImage& g, const PsfStack& dict,
                            const SolverParams& params, const PipelineOptions& opts = {});

struct SimulatedImage {
  Scene scene;
  ObservedImage observed;
};

/// Random scene and Poisson image. The scene, noise and mask streams are
/// derived from one seed. A perturbation, when given, degrades the imaging
/// mask used to render the data (its seed is replaced by the derived one).
SimulatedImage simulate(const OpticsConfig& cfg, int num_sources, double flux_mean,
                        double background, std::uint64_t seed,
                        std::optional<double> mask_sigma = std::nullopt);

struct CellResult {
  MatchReport pre;   // raw voxels
  MatchReport post;  // refined detections
  double seconds = 0.0;
  std::string error;  // non-empty if the cell failed
};

CellResult run_cell(const SimulatedImage& img, const PsfStack& dict, const SolverParams& params,
                    const PipelineOptions& opts, const MatchCriteria& crit);

/// Runs fn(0..count-1) on up to `threads` worker threads.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

std::vector<CellResult> run_batch(const std::vector<SimulatedImage>& images, const PsfStack& dict,
                                  const SolverParams& params, const PipelineOptions& opts,
                                  const MatchCriteria& crit, int threads);

struct BatchSummary {
  Summary pre;
  Summary post;
  int failures = 0;
};

BatchSummary summarize(const std::vector<CellResult>& cells);

struct TuningGrid {
  std::vector<double> mu;
  std::vector<double> a;
  std::vector<double> beta;  // beta0 = beta1
};

/// mu log-spaced over [0.01, 10] (7 values), a in {20, 80, 320},
/// beta in {0.1, 1, 10}.
TuningGrid default_tuning_grid();

struct TuneEntry {
  SolverParams params;
  Summary post;
};

struct TuneResult {
  SolverParams best;
  std::vector<TuneEntry> entries;
};

/// Grid search maximizing mean F1 after post-processing over the training
/// images. Ties keep the earlier grid point.
TuneResult tune(const std::vector<SimulatedImage>& train, const PsfStack& dict,
                const SolverParams& base, const TuningGrid& grid, const PipelineOptions& opts,
                const MatchCriteria& crit, int threads,
                const std::function<void(const TuneEntry&)>& progress = {});

}  // namespace rpsf
