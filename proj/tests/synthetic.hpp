#pragma once

#include <vector>

#include "cofedrec/dataset.hpp"
#include "cofedrec/rng.hpp"

namespace cofedrec::testutil {

// Planted two-group dataset: users in the first half prefer the first item
// block, users in the second half the second block; the preferred blocks
// are disjoint. A thin tail of background items is consumed lightly by
// both groups, mirroring the shared mainstream taste of real logs (without
// it the two groups are exact complements of each other and their private
// score functions anti-align, which erases every pairwise signal).
// Within a block, items are drawn with a Zipf-like popularity skew, giving
// models an actual ranking signal beyond bare block membership.
inline std::vector<RawRating> planted_ratings(int num_users, int num_items,
                                              int min_per_user, int max_per_user,
                                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RawRating> out;
  const int block = num_items * 2 / 5;       // two disjoint preferred blocks
  const int background = num_items - 2 * block;

  for (int u = 0; u < num_users; ++u) {
    const int group = u < num_users / 2 ? 0 : 1;
    const int lo = group * block;
    const int count = min_per_user + static_cast<int>(rng.uniform_index(
                                         static_cast<std::uint64_t>(max_per_user - min_per_user + 1)));

    // Candidate pool: own block plus the shared background tail.
    std::vector<int> pool;
    std::vector<double> weight;
    for (int i = 0; i < block; ++i) {
      pool.push_back(lo + i);
      weight.push_back(1.0 / std::pow(1.0 + i, 0.9));
    }
    for (int i = 0; i < background; ++i) {
      pool.push_back(2 * block + i);
      weight.push_back(0.35 / std::pow(1.0 + i, 0.9));
    }

    for (int j = 0; j < count; ++j) {
      double total = 0.0;
      for (double w : weight) total += w;
      double target = rng.uniform_real() * total;
      std::size_t pick = weight.size() - 1;
      double acc = 0.0;
      for (std::size_t i = 0; i < weight.size(); ++i) {
        acc += weight[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
      RawRating r;
      r.user_id = u;
      r.item_id = pool[pick];
      r.rating = 1.0 + static_cast<double>(rng.uniform_index(5));
      r.timestamp = static_cast<std::int64_t>(j) + 1;  // strictly increasing per user
      out.push_back(r);
      weight[pick] = 0.0;  // without replacement
    }
  }
  return out;
}

inline int planted_group(int user, int num_users) { return user < num_users / 2 ? 0 : 1; }

// Unstructured random implicit-feedback data for invariant tests.
inline std::vector<RawRating> random_ratings(int num_users, int num_items,
                                             int min_per_user, int max_per_user,
                                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RawRating> out;
  for (int u = 0; u < num_users; ++u) {
    const int count = min_per_user + static_cast<int>(rng.uniform_index(
                                         static_cast<std::uint64_t>(max_per_user - min_per_user + 1)));
    std::vector<int> items(static_cast<std::size_t>(num_items));
    for (int i = 0; i < num_items; ++i) items[static_cast<std::size_t>(i)] = i;
    rng.partial_shuffle(items, static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
      RawRating r;
      r.user_id = u;
      r.item_id = items[static_cast<std::size_t>(j)];
      r.rating = 1.0 + static_cast<double>(rng.uniform_index(5));
      r.timestamp = static_cast<std::int64_t>(rng.uniform_index(1000000));
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace cofedrec::testutil
