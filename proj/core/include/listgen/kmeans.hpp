#pragma once

#include <cstdint>
#include <vector>

#include "listgen/rng.hpp"

namespace listgen {

struct KMeansResult {
  // Compact cluster index per subset member, in subset order. Empty clusters
  // are dropped and the survivors renumbered in centroid order, so indices
  // are dense in [0, n_clusters).
  std::vector<int> assignment;
  int n_clusters = 0;
  int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding over points[subset]. Ties in the
// nearest-centroid step break toward the lowest centroid index, and the
// result depends only on (points, subset order, k, max_iters, rng state).
KMeansResult lloyd_kmeans(const std::vector<std::vector<double>>& points,
                          const std::vector<int>& subset, int k, int max_iters,
                          Rng& rng);

}  // namespace listgen
