#pragma once

#include <vector>

#include "rpsf/tensor.hpp"

namespace rpsf {

/// Neighbourhood used to grow clusters: voxels with |di|, |dj| <= lateral and
/// |dk| <= axial of a cluster member are neighbours.
struct ClusterTolerance {
  double lateral = 2.0;  // pixels
  double axial = 1.0;    // slices

  void validate() const;
};

/// A localized source in volume coordinates: x, y in pixels, z as a
/// (fractional) slice index.
struct Detection {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double flux = 0.0;
};

/// Greedy centroid clustering of the non-zero voxels. Each cluster is seeded at
/// the largest remaining voxel (ties go to the lexicographically smallest
/// (i, j, k)) and grown through neighbours whose value does not exceed the
/// seed. Returns one detection per cluster at its intensity-weighted centroid,
/// carrying the cluster's total value, sorted by flux descending.
std::vector<Detection> centroid_cluster(const Volume& volume, const ClusterTolerance& tol = {});

struct Clustering {
  std::vector<Detection> detections;
  /// Per voxel (volume indexing): index into detections, or -1 for zeros.
  std::vector<int> labels;
};

/// centroid_cluster together with the cluster label of every voxel.
Clustering cluster_voxels(const Volume& volume, const ClusterTolerance& tol = {});

/// Keeps detections with flux >= fraction * (largest flux).
std::vector<Detection> threshold_detections(const std::vector<Detection>& dets, double fraction);

/// One detection per non-zero voxel; the raw solver output viewed as a list.
std::vector<Detection> voxel_detections(const Volume& volume);

}  // namespace rpsf
