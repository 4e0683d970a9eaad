#include "rpsf/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "rpsf/error.hpp"

namespace rpsf {

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::KlNc: return "kl-nc";
    case Algorithm::KlL1: return "kl-l1";
    case Algorithm::L2L1: return "l2-l1";
    case Algorithm::L2Nc: return "l2-nc";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& name) {
  for (Algorithm a : all_algorithms())
    if (algorithm_name(a) == name) return a;
  throw ConfigError("unknown algorithm '" + name + "' (expected kl-nc, kl-l1, l2-l1 or l2-nc)");
}

const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> all = {Algorithm::L2L1, Algorithm::L2Nc, Algorithm::KlL1,
                                             Algorithm::KlNc};
  return all;
}

SolverParams params_for(Algorithm a, SolverParams p) {
  p.datafit = (a == Algorithm::KlNc || a == Algorithm::KlL1) ? DataFit::KL : DataFit::LeastSquares;
  p.regularizer =
      (a == Algorithm::KlNc || a == Algorithm::L2Nc) ? Regularizer::NonConvex : Regularizer::L1;
  return p;
}

PipelineResult run_pipeline(const ObservedImage& g, const PsfStack& dict,
                            const SolverParams& params, const PipelineOptions& opts) {
  PipelineResult res;
  res.solve = irl1_solve(g, dict, params);
  res.raw = voxel_detections(res.solve.volume);
  res.clustered =
      threshold_detections(centroid_cluster(res.solve.volume, opts.cluster), opts.threshold_fraction);
  res.refined = res.clustered;
  if (!opts.refine_flux || res.clustered.empty()) return res;
  try {
    const PsfMatrix H = build_H(res.clustered, dict.config);
    const FluxEstimate est =
        kl_flux_iterate(H, g, params.background, opts.flux_max_iter, opts.flux_tol);
    for (std::size_t i = 0; i < res.refined.size(); ++i)
      res.refined[i].flux = est.flux[static_cast<Eigen::Index>(i)];
    res.flux_iterations = est.iterations;
  } catch (const SingularSystemError& e) {
    res.flux_note = e.what();
  } catch (const DivergenceError& e) {
    res.flux_note = e.what();
  } catch (const DomainError& e) {
    res.flux_note = e.what();
  }
  return res;
}

SimulatedImage simulate(const OpticsConfig& cfg, int num_sources, double flux_mean,
                        double background, std::uint64_t seed, std::optional<double> mask_sigma) {
  SimulatedImage out;
  out.scene = random_scene(num_sources, cfg, flux_mean, background, derive_seed(seed, 0));
  out.scene.seed = seed;
  std::optional<MaskPerturbation> pert;
  if (mask_sigma && *mask_sigma > 0.0) pert = MaskPerturbation{*mask_sigma, derive_seed(seed, 2)};
  out.observed = sample_poisson(render(out.scene, cfg, pert), derive_seed(seed, 1));
  out.observed.seed = seed;
  return out;
}

CellResult run_cell(const SimulatedImage& img, const PsfStack& dict, const SolverParams& params,
                    const PipelineOptions& opts, const MatchCriteria& crit) {
  CellResult cell;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const PipelineResult res = run_pipeline(img.observed, dict, params, opts);
    cell.pre = match(img.scene, res.raw, crit, dict.config);
    cell.post = match(img.scene, res.refined, crit, dict.config);
  } catch (const std::exception& e) {
    cell.error = e.what();
    cell.pre = match(img.scene, {}, crit, dict.config);
    cell.post = cell.pre;
  }
  cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return cell;
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<CellResult> run_batch(const std::vector<SimulatedImage>& images, const PsfStack& dict,
                                  const SolverParams& params, const PipelineOptions& opts,
                                  const MatchCriteria& crit, int threads) {
  std::vector<CellResult> cells(images.size());
  parallel_for(static_cast<int>(images.size()), threads,
               [&](int i) { cells[i] = run_cell(images[i], dict, params, opts, crit); });
  return cells;
}

BatchSummary summarize(const std::vector<CellResult>& cells) {
  BatchSummary s;
  std::vector<MatchReport> pre, post;
  for (const CellResult& c : cells) {
    pre.push_back(c.pre);
    post.push_back(c.post);
    if (!c.error.empty()) ++s.failures;
  }
  s.pre = aggregate(pre);
  s.post = aggregate(post);
  return s;
}

TuningGrid default_tuning_grid() {
  TuningGrid g;
  for (int i = 0; i < 7; ++i) g.mu.push_back(0.01 * std::pow(1000.0, i / 6.0));
  g.a = {20.0, 80.0, 320.0};
  g.beta = {0.1, 1.0, 10.0};
  return g;
}

TuneResult tune(const std::vector<SimulatedImage>& train, const PsfStack& dict,
                const SolverParams& base, const TuningGrid& grid, const PipelineOptions& opts,
                const MatchCriteria& crit, int threads,
                const std::function<void(const TuneEntry&)>& progress) {
  if (grid.mu.empty() || grid.a.empty() || grid.beta.empty())
    throw ConfigError("tuning grid must be non-empty");
  if (train.empty()) throw ConfigError("tuning needs at least one training image");
  TuneResult result;
  double best_f1 = -1.0;
  for (double mu : grid.mu)
    for (double a : grid.a)
      for (double beta : grid.beta) {
        SolverParams p = base;
        p.mu = mu;
        p.a = a;
        p.beta0 = p.beta1 = beta;
        const BatchSummary s = summarize(run_batch(train, dict, p, opts, crit, threads));
        TuneEntry entry{p, s.post};
        if (progress) progress(entry);
        if (s.post.mean_f1 > best_f1) {
          best_f1 = s.post.mean_f1;
          result.best = p;
        }
        result.entries.push_back(std::move(entry));
      }
  return result;
}

}  // namespace rpsf
