#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "irda/encoding.hpp"
#include "irda/env.hpp"
#include "irda/sampling/kmeans.hpp"

namespace irda::sampling {

/// Relative slack under which two centroid distances are considered equal.
inline constexpr double kTieTolerance = 1e-9;

struct DiversitySample {
  std::vector<std::string> ids;  // one per cluster, in cluster order
  ClusterResult clusters;
};

/// Clusters the numeric encodings of `pool` and returns, for every cluster,
/// the member closest to the centroid (ties: lexicographically smallest id).
inline DiversitySample diversity_sample(const env::TrajectoryPool& pool, std::size_t k,
                                        std::uint64_t seed) {
  if (k < 1 || pool.size() < k) fail(ErrorKind::TooFewPoints, "pool smaller than k");
  std::vector<Point> points;
  points.reserve(pool.size());
  for (const auto& t : pool.trajectories) points.push_back(encoding::encode_numeric(t).flat);

  DiversitySample out;
  out.clusters = kmeans(points, k, seed);
  std::vector<double> dist(points.size());
  std::vector<double> best(k, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = out.clusters.labels[i];
    dist[i] = squared_distance(points[i], out.clusters.centroids[c]);
    best[c] = std::min(best[c], dist[i]);
  }
  // Distances equal up to rounding count as ties, so the id rule decides
  // rather than summation order.
  out.ids.resize(k);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = out.clusters.labels[i];
    const auto& id = pool.trajectories[i].id;
    if (dist[i] <= best[c] + kTieTolerance * std::max(1.0, best[c]) && (out.ids[c].empty() || id < out.ids[c]))
      out.ids[c] = id;
  }
  return out;
}

}  // namespace irda::sampling
