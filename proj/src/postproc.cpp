#include "rpsf/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "rpsf/error.hpp"

namespace rpsf {

void ClusterTolerance::validate() const {
  if (!(lateral > 0.0) || !(axial > 0.0)) throw ConfigError("cluster tolerances must be > 0");
}

Clustering cluster_voxels(const Volume& volume, const ClusterTolerance& tol) {
  tol.validate();
  const int m = volume.rows(), n = volume.cols(), d = volume.depth();
  const int reach_xy = static_cast<int>(std::floor(tol.lateral));
  const int reach_z = static_cast<int>(std::floor(tol.axial));

  // Enumerated in (i, j, k) lexicographic order so that the stable sort breaks
  // ties between equal maxima by that order.
  std::vector<std::size_t> order;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < d; ++k) {
        const std::size_t v = volume.index(i, j, k);
        if (volume[v] < 0.0) throw DomainError("centroid_cluster needs a non-negative volume");
        if (volume[v] > 0.0) order.push_back(v);
      }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return volume[a] > volume[b]; });

  std::vector<char> taken(volume.size(), 0);
  std::vector<int> labels(volume.size(), -1);
  std::vector<Detection> out;
  std::deque<std::size_t> queue;
  for (std::size_t seed : order) {
    if (taken[seed]) continue;
    const double seed_value = volume[seed];
    double sx = 0.0, sy = 0.0, sz = 0.0, total = 0.0;
    taken[seed] = 1;
    queue.push_back(seed);
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      const int k = static_cast<int>(v / (static_cast<std::size_t>(m) * n));
      const int i = static_cast<int>((v / n) % m);
      const int j = static_cast<int>(v % n);
      const double val = volume[v];
      labels[v] = static_cast<int>(out.size());
      sx += i * val;
      sy += j * val;
      sz += k * val;
      total += val;
      for (int ii = std::max(0, i - reach_xy); ii <= std::min(m - 1, i + reach_xy); ++ii)
        for (int jj = std::max(0, j - reach_xy); jj <= std::min(n - 1, j + reach_xy); ++jj)
          for (int kk = std::max(0, k - reach_z); kk <= std::min(d - 1, k + reach_z); ++kk) {
            const std::size_t w = volume.index(ii, jj, kk);
            if (taken[w] || !(volume[w] > 0.0) || volume[w] > seed_value) continue;
            taken[w] = 1;
            queue.push_back(w);
          }
    }
    out.push_back({sx / total, sy / total, sz / total, total});
  }

  std::vector<int> perm(out.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) { return out[a].flux > out[b].flux; });
  std::vector<int> rank(out.size());
  Clustering result;
  for (std::size_t r = 0; r < perm.size(); ++r) {
    rank[perm[r]] = static_cast<int>(r);
    result.detections.push_back(out[perm[r]]);
  }
  for (int& l : labels)
    if (l >= 0) l = rank[l];
  result.labels = std::move(labels);
  return result;
}

std::vector<Detection> centroid_cluster(const Volume& volume, const ClusterTolerance& tol) {
  return cluster_voxels(volume, tol).detections;
}

std::vector<Detection> threshold_detections(const std::vector<Detection>& dets, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("threshold fraction must be in [0, 1)");
  if (dets.empty()) return {};
  double peak = dets.front().flux;
  for (const Detection& det : dets) peak = std::max(peak, det.flux);
  const double cut = fraction * peak;
  std::vector<Detection> kept;
  std::copy_if(dets.begin(), dets.end(), std::back_inserter(kept),
               [&](const Detection& det) { return det.flux >= cut; });
  return kept;
}

std::vector<Detection> voxel_detections(const Volume& volume) {
  std::vector<Detection> out;
  for (int i = 0; i < volume.rows(); ++i)
    for (int j = 0; j < volume.cols(); ++j)
      for (int k = 0; k < volume.depth(); ++k)
        if (volume(i, j, k) > 0.0) out.push_back({double(i), double(j), double(k), volume(i, j, k)});
  return out;
}

}  // namespace rpsf
