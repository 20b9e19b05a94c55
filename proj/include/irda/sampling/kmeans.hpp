#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "irda/core/error.hpp"
#include "irda/core/random.hpp"

namespace irda::sampling {

using Point = std::vector<double>;

struct ClusterResult {
  std::vector<std::size_t> labels;  // point index -> cluster
  std::vector<Point> centroids;
  double inertia = 0.0;
  /// Inertia after every centroid update; non-increasing.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
  bool converged = false;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

namespace detail {

inline std::size_t nearest(const Point& p, const std::vector<Point>& centroids, double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

// Greedy k-means++: each new centre is the best (lowest resulting potential)
// of 2 + floor(ln k) D^2-weighted candidates.
inline std::vector<Point> plus_plus_init(std::span<const Point> points, std::size_t k, Rng& rng) {
  const std::size_t n = points.size();
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  std::vector<Point> centres;
  centres.push_back(points[uniform_index(rng, n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centres[0]);

  while (centres.size() < k) {
    double potential = 0.0;
    for (double d : d2) potential += d;
    std::size_t best_candidate = 0;
    double best_potential = std::numeric_limits<double>::infinity();
    std::vector<double> best_d2;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t cand =
          potential > 0.0 ? weighted_index(rng, d2) : static_cast<std::size_t>(uniform_index(rng, n));
      std::vector<double> next(n);
      double pot = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        next[i] = std::min(d2[i], squared_distance(points[i], points[cand]));
        pot += next[i];
      }
      if (pot < best_potential) {
        best_potential = pot;
        best_candidate = cand;
        best_d2 = std::move(next);
      }
    }
    centres.push_back(points[best_candidate]);
    d2 = std::move(best_d2);
  }
  return centres;
}

inline void update_centroids(std::span<const Point> points, const std::vector<std::size_t>& labels,
                             std::vector<Point>& centroids) {
  const std::size_t dim = points.front().size();
  std::vector<std::size_t> counts(centroids.size(), 0);
  for (auto& c : centroids) std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& c = centroids[labels[i]];
    for (std::size_t d = 0; d < dim; ++d) c[d] += points[i][d];
    ++counts[labels[i]];
  }
  for (std::size_t c = 0; c < centroids.size(); ++c)
    for (auto& v : centroids[c]) v /= static_cast<double>(counts[c]);
}

// Moves the point farthest from its centroid into each empty cluster.
inline void repair_empty(std::span<const Point> points, std::vector<std::size_t>& labels,
                         std::vector<Point>& centroids) {
  for (;;) {
    std::vector<std::size_t> counts(centroids.size(), 0);
    for (auto l : labels) ++counts[l];
    const auto empty = std::find(counts.begin(), counts.end(), 0u);
    if (empty == counts.end()) return;
    std::size_t far = points.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (counts[labels[i]] < 2) continue;
      const double d = squared_distance(points[i], centroids[labels[i]]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    const auto target = static_cast<std::size_t>(empty - counts.begin());
    labels[far] = target;
    centroids[target] = points[far];
  }
}

inline double inertia_of(std::span<const Point> points, const std::vector<std::size_t>& labels,
                         const std::vector<Point>& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) s += squared_distance(points[i], centroids[labels[i]]);
  return s;
}

}  // namespace detail

/// Lloyd's algorithm from a seeded greedy k-means++ start. Stops when no
/// assignment changes, the relative inertia change drops below `tol`, or
/// after `max_iter` updates.
inline ClusterResult kmeans(std::span<const Point> points, std::size_t k, std::uint64_t seed,
                            std::size_t max_iter = 100, double tol = 1e-6) {
  if (k < 1 || points.size() < k) fail(ErrorKind::TooFewPoints, "kmeans needs points >= k >= 1");
  const std::size_t dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) fail(ErrorKind::DimensionMismatch, "points differ in dimension");

  Rng rng(derive_seed(seed, "kmeans++"));
  ClusterResult r;
  r.centroids = detail::plus_plus_init(points, k, rng);
  r.labels.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) r.labels[i] = detail::nearest(points[i], r.centroids);

  double prev = std::numeric_limits<double>::infinity();
  while (r.iterations < std::max<std::size_t>(max_iter, 1)) {
    ++r.iterations;
    detail::repair_empty(points, r.labels, r.centroids);
    detail::update_centroids(points, r.labels, r.centroids);
    const double inertia = detail::inertia_of(points, r.labels, r.centroids);
    r.inertia_history.push_back(inertia);

    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = detail::nearest(points[i], r.centroids);
      if (c != r.labels[i]) {
        r.labels[i] = c;
        changed = true;
      }
    }
    if (!changed) {
      r.converged = true;
      break;
    }
    if (std::isfinite(prev) && (prev <= 0.0 || (prev - inertia) <= tol * prev)) break;
    prev = inertia;
  }
  if (!r.converged) {
    detail::repair_empty(points, r.labels, r.centroids);
  }
  r.inertia = detail::inertia_of(points, r.labels, r.centroids);
  return r;
}

}  // namespace irda::sampling
