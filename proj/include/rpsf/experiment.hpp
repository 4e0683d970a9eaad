#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpsf/pipeline.hpp"

namespace rpsf {

struct SimulationConfig {
  std::vector<int> densities = {5, 10, 15, 20, 30, 40};
  double flux_mean = 2000.0;
  double background = 5.0;
  int n_train = 20;
  int n_test = 20;
  std::uint64_t base_seed = 1000;

  std::uint64_t train_seed(int i) const { return base_seed + static_cast<std::uint64_t>(i); }
  std::uint64_t test_seed(int i) const { return base_seed + 1000 + static_cast<std::uint64_t>(i); }
};

struct StudyConfig {
  std::vector<Algorithm> algorithms = all_algorithms();
  /// Pupil phase noise levels for the stability sweep (KL-NC only).
  std::vector<double> mask_sigmas;
  /// Source flux for the low-photon comparison (KL-NC vs l2-NC).
  double low_photon_flux = 1000.0;
  int study_density = 15;
  bool stability = true;
  bool low_photon = true;
};

struct ExperimentConfig {
  OpticsConfig optics;
  SimulationConfig simulation;
  std::map<Algorithm, SolverParams> solver;
  std::map<Algorithm, TuningGrid> tuning;
  PipelineOptions pipeline;
  MatchCriteria match;
  StudyConfig studies;
  std::string output_dir = "runs/default";

  /// Solver parameters for an algorithm, with datafit, regularizer and
  /// background filled in.
  SolverParams params(Algorithm a) const;
  void validate() const;
};

/// Built-in defaults: untuned solver parameters, the default tuning grid for
/// every algorithm, and sigma in {0, 2pi/40, 2pi/20, 2pi/10}.
ExperimentConfig default_experiment_config();

/// Sections present in j override the defaults; absent ones keep them.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Hash of the canonical JSON form, output directory excluded.
std::string config_hash(const ExperimentConfig& cfg);

struct StudyRow {
  std::string study;  // "table", "low_photon" or "stability"
  Algorithm algorithm = Algorithm::KlNc;
  int density = 0;
  double flux_mean = 0.0;
  double mask_sigma = 0.0;
  BatchSummary summary;
  std::vector<CellResult> cells;
  std::vector<std::uint64_t> seeds;
};

struct ExperimentResults {
  std::vector<StudyRow> rows;
};

/// Test-image runs for the table, low-photon and stability studies. Cell
/// failures are recorded in the rows and do not stop the run.
ExperimentResults run_experiment(const ExperimentConfig& cfg, const PsfStack& dict, int threads,
                                 const std::function<void(const StudyRow&)>& progress = {});

/// CSV study,algorithm,density,flux_mean,mask_sigma, post and pre scores, failures.
std::string format_table(const ExperimentResults& res, const std::string& study);
/// algorithm,density,bin_lo,bin_hi,count for the table study
std::string format_histograms(const ExperimentResults& res);
/// One line per failed cell.
std::string format_failures(const ExperimentResults& res);

std::string format_scoreboard(const TuneResult& res);

}  // namespace rpsf
