#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "cofedrec/clustering.hpp"

using namespace cofedrec;

namespace {

Mat random_rows(int n, int d, Rng& rng, double stddev = 1.0) {
  Mat m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal(0.0, stddev);
  return m;
}

// Exhaustive assignment optimum for tiny instances: try every labeling,
// centroids are the cluster means.
struct ExhaustiveOpt {
  double objective = std::numeric_limits<double>::infinity();
  std::vector<int> labels;
  Mat centroids;
};

ExhaustiveOpt exhaustive_kmeans(const Mat& rows, int k) {
  const int n = static_cast<int>(rows.rows());
  ExhaustiveOpt best;
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  const long total = static_cast<long>(std::pow(k, n));
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = 0; i < n; ++i) {
      labels[static_cast<std::size_t>(i)] = static_cast<int>(c % k);
      c /= k;
    }
    Mat centroids = Mat::Zero(k, rows.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      centroids.row(labels[static_cast<std::size_t>(i)]) += rows.row(i);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    bool empty = false;
    for (int c2 = 0; c2 < k; ++c2) {
      if (counts[static_cast<std::size_t>(c2)] == 0) {
        empty = true;
        break;
      }
      centroids.row(c2) /= static_cast<double>(counts[static_cast<std::size_t>(c2)]);
    }
    if (empty) continue;
    double obj = 0.0;
    for (int i = 0; i < n; ++i)
      obj += (rows.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
    if (obj < best.objective) {
      best.objective = obj;
      best.labels = labels;
      best.centroids = centroids;
    }
  }
  return best;
}

bool labels_match_up_to_permutation(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> fwd, rev;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto f = fwd.find(a[i]);
    auto r = rev.find(b[i]);
    if (f == fwd.end() && r == rev.end()) {
      fwd[a[i]] = b[i];
      rev[b[i]] = a[i];
    } else if (f == fwd.end() || r == rev.end() || f->second != b[i] || r->second != a[i]) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE("clustering") {

TEST_CASE("k=1 closed form") {
  Rng rng(1);
  const Mat rows = random_rows(20, 3, rng);
  Rng krng(2);
  const auto res = kmeans(rows, 1, krng);
  for (int label : res.membership.labels) CHECK(label == 0);
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  CHECK((res.centroids.row(0) - mean).norm() < 1e-9);
  double expected = 0.0;
  for (int i = 0; i < rows.rows(); ++i) expected += (rows.row(i) - mean).squaredNorm();
  CHECK(res.objective == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("k=n with distinct rows reaches zero objective") {
  Rng rng(3);
  const Mat rows = random_rows(8, 2, rng);
  Rng krng(4);
  const auto res = kmeans(rows, 8, krng);
  CHECK(res.objective == doctest::Approx(0.0).epsilon(1e-12));
  std::vector<int> sorted = res.membership.labels;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 8; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("two well-separated blobs are recovered exactly") {
  Rng rng(5);
  Mat rows(12, 2);
  for (int i = 0; i < 6; ++i) rows.row(i) << rng.normal(0.0, 0.05), rng.normal(0.0, 0.05);
  for (int i = 6; i < 12; ++i) rows.row(i) << rng.normal(8.0, 0.05), rng.normal(8.0, 0.05);

  Rng krng(6);
  const auto res = kmeans(rows, 2, krng);
  const auto opt = exhaustive_kmeans(rows, 2);
  CHECK(res.objective == doctest::Approx(opt.objective).epsilon(1e-9));
  CHECK(labels_match_up_to_permutation(res.membership.labels, opt.labels));
}

TEST_CASE("seeded from the optimum, Lloyd's stays at the optimum") {
  Rng rng(7);
  for (int it = 0; it < 20; ++it) {
    const int n = 5 + static_cast<int>(rng.uniform_index(8));
    const int k = 2 + static_cast<int>(rng.uniform_index(2));
    const Mat rows = random_rows(n, 2, rng);
    const auto opt = exhaustive_kmeans(rows, k);
    Rng krng(1);
    const auto res = kmeans(rows, k, krng, 100, 1e-9, &opt.centroids);
    CHECK(res.objective <= opt.objective + 1e-9);
    CHECK(res.objective >= opt.objective - 1e-9);
    CHECK(labels_match_up_to_permutation(res.membership.labels, opt.labels));
  }
}

TEST_CASE("assignment optimality at convergence") {
  Rng rng(9);
  const Mat rows = random_rows(40, 3, rng);
  Rng krng(10);
  const auto res = kmeans(rows, 5, krng);
  for (int i = 0; i < rows.rows(); ++i) {
    const double assigned =
        (rows.row(i) - res.centroids.row(res.membership.labels[static_cast<std::size_t>(i)]))
            .squaredNorm();
    for (int c = 0; c < 5; ++c)
      CHECK(assigned <= (rows.row(i) - res.centroids.row(c)).squaredNorm() + 1e-12);
  }
}

TEST_CASE("same rows, K and seed give identical labels") {
  Rng rng(11);
  const Mat rows = random_rows(30, 4, rng);
  Rng a(42), b(42);
  const auto ra = kmeans(rows, 4, a);
  const auto rb = kmeans(rows, 4, b);
  CHECK(ra.membership.labels == rb.membership.labels);
  CHECK(ra.objective == rb.objective);
}

TEST_CASE("duplicate points force empty-cluster reseeding without a crash") {
  Mat rows = Mat::Zero(6, 2);  // all identical
  Rng krng(13);
  const auto res = kmeans(rows, 3, krng);
  CHECK(res.objective == doctest::Approx(0.0));
}

TEST_CASE("input validation") {
  Mat rows = Mat::Zero(3, 2);
  Rng rng(1);
  CHECK_THROWS_AS(kmeans(rows, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(kmeans(rows, 4, rng), std::invalid_argument);
  rows(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(kmeans(rows, 2, rng), std::invalid_argument);
}

TEST_CASE("category_items enumerates a disjoint partition") {
  ItemMembership m{{0, 1, 0, 2, 1}, 3};
  CHECK(category_items(m, 0) == std::vector<int>{0, 2});
  CHECK(category_items(m, 1) == std::vector<int>{1, 4});
  CHECK(category_items(m, 2) == std::vector<int>{3});
  CHECK_THROWS_AS(category_items(m, 3), std::out_of_range);
  CHECK_THROWS_AS(category_items(m, -1), std::out_of_range);

  std::vector<int> all;
  for (int k = 0; k < 3; ++k) {
    const auto items = category_items(m, k);
    all.insert(all.end(), items.begin(), items.end());
  }
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<int>{0, 1, 2, 3, 4});

  ItemMembership empty_cat{{0, 0}, 2};
  CHECK(category_items(empty_cat, 1).empty());
  CHECK(clusters_with_min_size(empty_cat, 2) == std::vector<int>{0});
}

}  // TEST_SUITE
