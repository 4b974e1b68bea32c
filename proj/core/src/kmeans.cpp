#include "listgen/kmeans.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace listgen {
namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

}  // namespace

KMeansResult lloyd_kmeans(const std::vector<std::vector<double>>& points,
                          const std::vector<int>& subset, int k, int max_iters,
                          Rng& rng) {
  const int n = static_cast<int>(subset.size());
  if (n == 0) throw std::invalid_argument("k-means over zero documents");
  if (k < 1) throw std::invalid_argument("k must be positive");
  if (k > n) k = n;

  const std::size_t dim = points[subset[0]].size();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(k);

  // k-means++ seeding. The first centroid is uniform; later ones are drawn
  // proportional to squared distance from the nearest chosen centroid. When
  // all remaining mass is zero (duplicate points) fall back to the first
  // unused point so the draw stays deterministic.
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  centroids.push_back(points[subset[first]]);
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double d2 = sq_dist(points[subset[i]], centroids.back());
      if (d2 < min_d2[i]) min_d2[i] = d2;
      total += min_d2[i];
    }
    int pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += min_d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
        pick = i;
      }
    }
    centroids.push_back(points[subset[pick]]);
  }

  std::vector<int> assignment(n, 0);
  std::vector<int> counts(k, 0);
  int iterations = 0;
  for (; iterations < max_iters; ++iterations) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      const auto& p = points[subset[i]];
      int best = 0;
      double best_d2 = sq_dist(p, centroids[0]);
      for (int c = 1; c < k; ++c) {
        double d2 = sq_dist(p, centroids[c]);
        if (d2 < best_d2) {
          best_d2 = d2;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (!changed && iterations > 0) break;

    for (auto& c : centroids) std::fill(c.begin(), c.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      const auto& p = points[subset[i]];
      auto& c = centroids[assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) c[d] += p[d];
      ++counts[assignment[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster, dropped at the end
      for (std::size_t d = 0; d < dim; ++d) centroids[c][d] /= counts[c];
    }
  }

  // Renumber to drop empty clusters, preserving centroid order.
  std::vector<int> remap(k, -1);
  int next = 0;
  std::fill(counts.begin(), counts.end(), 0);
  for (int i = 0; i < n; ++i) ++counts[assignment[i]];
  for (int c = 0; c < k; ++c) {
    if (counts[c] > 0) remap[c] = next++;
  }
  KMeansResult result;
  result.assignment.resize(n);
  for (int i = 0; i < n; ++i) result.assignment[i] = remap[assignment[i]];
  result.n_clusters = next;
  result.iterations = iterations;
  return result;
}

}  // namespace listgen
