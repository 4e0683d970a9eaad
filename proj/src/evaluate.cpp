#include "rpsf/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rpsf/error.hpp"

namespace rpsf {

void MatchCriteria::validate() const {
  if (!(lateral_tol > 0.0) || !(axial_tol > 0.0)) throw ConfigError("match tolerances must be > 0");
}

namespace {

struct Candidate {
  int truth;
  int det;
  double distance;
};

std::vector<Candidate> candidates(const Scene& truth, const std::vector<Detection>& dets,
                                  const MatchCriteria& crit, const OpticsConfig& cfg) {
  crit.validate();
  std::vector<Candidate> out;
  for (int t = 0; t < static_cast<int>(truth.sources.size()); ++t) {
    const PointSource& s = truth.sources[t];
    const double sz = cfg.slice_of(s.zeta);
    for (int d = 0; d < static_cast<int>(dets.size()); ++d) {
      const Detection& det = dets[d];
      const double dxy = std::hypot(det.x - s.x, det.y - s.y);
      const double dz = std::abs(det.z - sz);
      if (dxy > crit.lateral_tol || dz > crit.axial_tol) continue;
      out.push_back({t, d, std::hypot(dxy / crit.lateral_tol, dz / crit.axial_tol)});
    }
  }
  return out;
}

double ratio(int num, int den, bool both_empty) {
  if (den == 0) return both_empty ? 1.0 : 0.0;
  return static_cast<double>(num) / den;
}

MatchReport finish(const Scene& truth, const std::vector<Detection>& dets,
                   std::vector<MatchPair> pairs) {
  MatchReport rep;
  rep.num_truth = static_cast<int>(truth.sources.size());
  rep.num_detections = static_cast<int>(dets.size());
  std::sort(pairs.begin(), pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.truth < b.truth; });
  std::vector<char> truth_used(rep.num_truth, 0), det_used(rep.num_detections, 0);
  for (const MatchPair& p : pairs) {
    truth_used[p.truth] = 1;
    det_used[p.detection] = 1;
    const double f_true = truth.sources[p.truth].flux;
    if (f_true > 0.0) rep.flux_rel_errors.push_back((dets[p.detection].flux - f_true) / f_true);
  }
  for (int t = 0; t < rep.num_truth; ++t)
    if (!truth_used[t]) rep.false_negatives.push_back(t);
  for (int d = 0; d < rep.num_detections; ++d)
    if (!det_used[d]) rep.false_positives.push_back(d);
  const int tp = static_cast<int>(pairs.size());
  const bool both_empty = rep.num_truth == 0 && rep.num_detections == 0;
  rep.recall = ratio(tp, rep.num_truth, both_empty);
  rep.precision = ratio(tp, rep.num_detections, both_empty);
  rep.true_positives = std::move(pairs);
  return rep;
}

}  // namespace

MatchReport match(const Scene& truth, const std::vector<Detection>& dets,
                  const MatchCriteria& crit, const OpticsConfig& cfg) {
  std::vector<Candidate> cands = candidates(truth, dets, crit, cfg);
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.truth != b.truth) return a.truth < b.truth;
    return a.det < b.det;
  });
  std::vector<char> truth_used(truth.sources.size(), 0), det_used(dets.size(), 0);
  std::vector<MatchPair> pairs;
  for (const Candidate& c : cands) {
    if (truth_used[c.truth] || det_used[c.det]) continue;
    truth_used[c.truth] = 1;
    det_used[c.det] = 1;
    pairs.push_back({c.truth, c.det, c.distance});
  }
  return finish(truth, dets, std::move(pairs));
}

MatchReport match_optimal(const Scene& truth, const std::vector<Detection>& dets,
                          const MatchCriteria& crit, const OpticsConfig& cfg) {
  const int nt = static_cast<int>(truth.sources.size());
  const int nd = static_cast<int>(dets.size());
  if (nt > 12 || nd > 12) throw ConfigError("match_optimal is limited to 12 truths and detections");
  const std::vector<Candidate> cands = candidates(truth, dets, crit, cfg);
  std::vector<std::vector<Candidate>> by_truth(nt);
  for (const Candidate& c : cands) by_truth[c.truth].push_back(c);

  std::vector<MatchPair> best, current;
  int best_count = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<char> det_used(nd, 0);
  double cost = 0.0;

  auto search = [&](auto&& self, int t) -> void {
    if (t == nt) {
      const int count = static_cast<int>(current.size());
      if (count > best_count || (count == best_count && cost < best_cost - 1e-15)) {
        best_count = count;
        best_cost = cost;
        best = current;
      }
      return;
    }
    // Prune: even matching every remaining truth cannot beat the best count.
    if (static_cast<int>(current.size()) + (nt - t) < best_count) return;
    for (const Candidate& c : by_truth[t]) {
      if (det_used[c.det]) continue;
      det_used[c.det] = 1;
      current.push_back({c.truth, c.det, c.distance});
      cost += c.distance;
      self(self, t + 1);
      cost -= c.distance;
      current.pop_back();
      det_used[c.det] = 0;
    }
    self(self, t + 1);
  };
  search(search, 0);
  return finish(truth, dets, std::move(best));
}

double f1_score(double recall, double precision) {
  const double s = recall + precision;
  return s > 0.0 ? 2.0 * recall * precision / s : 0.0;
}

Summary aggregate(const std::vector<MatchReport>& reports) {
  if (reports.empty()) throw ConfigError("aggregate needs at least one report");
  Summary s;
  s.num_reports = static_cast<int>(reports.size());
  const int bins = static_cast<int>(std::lround(-2.0 * s.bin_lo / s.bin_width));
  s.histogram.assign(static_cast<std::size_t>(bins), 0);
  for (const MatchReport& r : reports) {
    s.mean_recall += r.recall;
    s.mean_precision += r.precision;
    s.mean_f1 += f1_score(r.recall, r.precision);
    s.true_positives += static_cast<int>(r.true_positives.size());
    for (double e : r.flux_rel_errors) {
      int b = static_cast<int>(std::floor((e - s.bin_lo) / s.bin_width));
      b = std::clamp(b, 0, bins - 1);
      ++s.histogram[static_cast<std::size_t>(b)];
    }
  }
  s.mean_recall /= s.num_reports;
  s.mean_precision /= s.num_reports;
  s.mean_f1 /= s.num_reports;
  return s;
}

}  // namespace rpsf
