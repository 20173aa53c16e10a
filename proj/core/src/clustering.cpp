#include "cofedrec/clustering.hpp"

#include <cassert>
#include <limits>
#include <stdexcept>

namespace cofedrec {

namespace {

// Squared Euclidean distance between row r of m and row c of centroids.
inline double sq_dist(const Mat& m, Eigen::Index r, const Mat& c, Eigen::Index k) {
  return (m.row(r) - c.row(k)).squaredNorm();
}

Mat kmeanspp_seed(const Mat& rows, int k, Rng& rng) {
  const Eigen::Index n = rows.rows();
  Mat centroids(k, rows.cols());
  std::vector<double> d2(static_cast<std::size_t>(n),
                         std::numeric_limits<double>::infinity());

  Eigen::Index first = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
  centroids.row(0) = rows.row(first);

  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double d = sq_dist(rows, i, centroids, c - 1);
      if (d < d2[static_cast<std::size_t>(i)]) d2[static_cast<std::size_t>(i)] = d;
      total += d2[static_cast<std::size_t>(i)];
    }
    Eigen::Index pick;
    if (total > 0.0) {
      double target = rng.uniform_real() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      // All points coincide with chosen centroids.
      pick = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = rows.row(pick);
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const Mat& rows, int k, Rng& rng, int max_iters, double tol,
                    const Mat* initial_centroids) {
  const Eigen::Index n = rows.rows();
  if (k < 1 || static_cast<Eigen::Index>(k) > n)
    throw std::invalid_argument("kmeans: need 1 <= k <= number of rows");
  if (!rows.allFinite()) throw std::invalid_argument("kmeans: non-finite input rows");

  KMeansResult res;
  res.centroids = initial_centroids ? *initial_centroids : kmeanspp_seed(rows, k, rng);
  if (res.centroids.rows() != k || res.centroids.cols() != rows.cols())
    throw std::invalid_argument("kmeans: initial centroid shape mismatch");

  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::vector<double> point_d2(static_cast<std::size_t>(n), 0.0);
  double prev_objective = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < max_iters; ++iter) {
    res.iterations = iter + 1;

    // Assignment: nearest centroid, ties to the lowest cluster id.
    double objective = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(rows, i, res.centroids, 0);
      for (int c = 1; c < k; ++c) {
        double d = sq_dist(rows, i, res.centroids, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      labels[static_cast<std::size_t>(i)] = best;
      point_d2[static_cast<std::size_t>(i)] = best_d;
      objective += best_d;
    }

    // Lloyd's objective never increases between assignment steps (allow
    // for rounding jitter at convergence).
    assert(objective <= prev_objective * (1.0 + 1e-12) + 1e-12);
    prev_objective = objective;
    res.objective = objective;

    // Update: mean of members, sequential over ascending item index.
    Mat sums = Mat::Zero(k, rows.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += rows.row(i);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }

    // Reseed empty clusters with the point farthest from its centroid.
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (taken[static_cast<std::size_t>(i)]) continue;
        if (point_d2[static_cast<std::size_t>(i)] > far_d) {
          far_d = point_d2[static_cast<std::size_t>(i)];
          far = i;
        }
      }
      if (far < 0) break;
      taken[static_cast<std::size_t>(far)] = true;
      sums.row(c) = rows.row(far);
      counts[static_cast<std::size_t>(c)] = 1;
    }

    double movement = 0.0;
    for (int c = 0; c < k; ++c) {
      Eigen::RowVectorXd next = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      movement = std::max(movement, (next - res.centroids.row(c)).norm());
      res.centroids.row(c) = next;
    }
    if (movement < tol) break;
  }

  // Final assignment against the converged centroids.
  double objective = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = sq_dist(rows, i, res.centroids, 0);
    for (int c = 1; c < k; ++c) {
      double d = sq_dist(rows, i, res.centroids, c);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    objective += best_d;
  }
  res.objective = objective;
  res.membership.labels = std::move(labels);
  res.membership.num_clusters = k;
  return res;
}

std::vector<int> category_items(const ItemMembership& membership, int k) {
  if (k < 0 || k >= membership.num_clusters)
    throw std::out_of_range("category_items: cluster id out of range");
  std::vector<int> out;
  for (std::size_t i = 0; i < membership.labels.size(); ++i)
    if (membership.labels[i] == k) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> clusters_with_min_size(const ItemMembership& membership, int min_size) {
  std::vector<int> counts(static_cast<std::size_t>(membership.num_clusters), 0);
  for (int label : membership.labels) ++counts[static_cast<std::size_t>(label)];
  std::vector<int> out;
  for (int c = 0; c < membership.num_clusters; ++c)
    if (counts[static_cast<std::size_t>(c)] >= min_size) out.push_back(c);
  return out;
}

}  // namespace cofedrec
