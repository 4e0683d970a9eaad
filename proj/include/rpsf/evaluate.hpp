#pragma once

#include <vector>

#include "rpsf/optics.hpp"
#include "rpsf/postproc.hpp"
#include "rpsf/scene.hpp"

namespace rpsf {

struct MatchCriteria {
  double lateral_tol = 2.0;  // pixels
  double axial_tol = 1.0;    // dictionary slices

  void validate() const;
};

struct MatchPair {
  int truth = 0;
  int detection = 0;
  double distance = 0.0;  // sqrt((dxy / lateral_tol)^2 + (dz / axial_tol)^2)
};

struct MatchReport {
  std::vector<MatchPair> true_positives;
  std::vector<int> false_positives;  // detection indices
  std::vector<int> false_negatives;  // truth indices
  int num_truth = 0;
  int num_detections = 0;
  double recall = 0.0;
  double precision = 0.0;
  std::vector<double> flux_rel_errors;  // (f_est - f_true) / f_true per pair
};

/// Greedy one-to-one matching: candidate pairs within both tolerances are
/// accepted in order of increasing normalized distance. Truth zeta values are
/// converted to slice units with the dictionary grid of cfg.
MatchReport match(const Scene& truth, const std::vector<Detection>& dets,
                  const MatchCriteria& crit, const OpticsConfig& cfg);

/// Exhaustive matching maximizing the number of pairs, then minimizing the
/// summed normalized distance. Intended for cross-checking on small inputs;
/// throws ConfigError beyond 12 truths or 12 detections.
MatchReport match_optimal(const Scene& truth, const std::vector<Detection>& dets,
                          const MatchCriteria& crit, const OpticsConfig& cfg);

double f1_score(double recall, double precision);

struct Summary {
  int num_reports = 0;
  double mean_recall = 0.0;
  double mean_precision = 0.0;
  double mean_f1 = 0.0;
  int true_positives = 0;
  /// Pooled flux relative errors in bins of width 0.05 over [-1, 1]; values
  /// outside the range fall into the end bins.
  double bin_width = 0.05;
  double bin_lo = -1.0;
  std::vector<int> histogram;
};

Summary aggregate(const std::vector<MatchReport>& reports);

}  // namespace rpsf
