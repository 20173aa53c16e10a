#pragma once

#include <vector>

#include "cofedrec/matrix.hpp"
#include "cofedrec/rng.hpp"

namespace cofedrec {

// Cluster label per item, labels in [0, num_clusters).
struct ItemMembership {
  std::vector<int> labels;
  int num_clusters = 0;
};

struct KMeansResult {
  ItemMembership membership;
  Mat centroids;            // num_clusters x d
  double objective = 0.0;   // within-cluster sum of squared distances
  int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding. Nearest centroid by Euclidean
// distance, ties to the lowest cluster id; empty clusters are reseeded with
// the point currently farthest from its centroid. Stops when the largest
// centroid movement drops below tol or after max_iters. Passing
// initial_centroids skips seeding (used by the exhaustive-optimum oracle).
KMeansResult kmeans(const Mat& rows, int k, Rng& rng, int max_iters = 100,
                    double tol = 1e-6, const Mat* initial_centroids = nullptr);

// Ascending indices of items labeled k.
std::vector<int> category_items(const ItemMembership& membership, int k);

// Cluster ids with at least min_size members, ascending.
std::vector<int> clusters_with_min_size(const ItemMembership& membership, int min_size);

}  // namespace cofedrec
