#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "cofedrec/rng.hpp"

namespace cofedrec {

struct RawRating {
  std::int64_t user_id = 0;
  std::int64_t item_id = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;
};

enum class RatingFormat { auto_detect, dat, csv };

struct LoadStats {
  std::size_t total_lines = 0;
  std::size_t malformed_lines = 0;
  std::size_t missing_timestamps = 0;  // pseudo-timestamped by line order
};

// Reads a rating log. `dat` is the ::-separated MovieLens layout, `csv`
// accepts comma- or tab-separated user,item,rating[,timestamp] with an
// optional header line. Malformed lines raise unless max_malformed allows
// them; they are always counted in `stats`.
std::vector<RawRating> load_movielens(const std::filesystem::path& path,
                                      RatingFormat format = RatingFormat::auto_detect,
                                      LoadStats* stats = nullptr,
                                      std::size_t max_malformed = 0);

// Per-user implicit-feedback dataset with leave-latest-out splits.
// Indices are dense: users in [0, num_users), items in [0, num_items).
struct InteractionDataset {
  int num_users = 0;
  int num_items = 0;
  std::vector<std::vector<int>> train;  // sorted ascending item indices
  std::vector<int> validation;          // -1 when absent
  std::vector<int> test;                // -1 when absent
  std::vector<std::int64_t> user_ids;   // dense -> raw
  std::vector<std::int64_t> item_ids;   // dense -> raw
  std::unordered_map<std::int64_t, int> user_index;  // raw -> dense
  std::unordered_map<std::int64_t, int> item_index;  // raw -> dense
  std::vector<std::string> warnings;    // dropped-user notices etc.

  bool in_train(int user, int item) const;
  std::size_t total_train() const;
};

// Dedup (latest timestamp wins), filter users below min_interactions,
// leave-latest-out split (latest -> test, next -> validation, rest ->
// train), densify ids. Timestamp ties break by ascending raw item id.
InteractionDataset build_splits(const std::vector<RawRating>& ratings,
                                int min_interactions = 5);

struct NegativeSample {
  std::vector<int> items;
  bool with_replacement = false;  // set when the non-interacted pool ran out
};

// num_per_positive * |train_u| negatives drawn uniformly (without
// replacement while the pool lasts) from items outside the user's train
// set. `extra_excluded` removes this round's explicit virtual negatives
// from the pool; pass sorted unique indices.
NegativeSample sample_train_negatives(const InteractionDataset& ds, int user,
                                      int num_per_positive, Rng& rng,
                                      const std::vector<int>& extra_excluded = {});

enum class EvalMode { sampled, full_rank };
enum class EvalSplit { test, validation };

struct EvalCandidates {
  EvalMode mode = EvalMode::sampled;
  // Per-user candidate list: 99 sampled negatives plus the positive, in
  // sampled mode. Empty lists in full-rank mode (ranking covers all items
  // outside the user's train/validation positives).
  std::vector<std::vector<int>> lists;
  std::vector<int> shortfall;  // negatives short of 99, per user
};

EvalCandidates build_eval_candidates(const InteractionDataset& ds, EvalMode mode,
                                     Rng& rng, EvalSplit split = EvalSplit::test);

struct VirtualRating {
  int item = 0;
  int label = 0;  // Bernoulli(0.5): 1 joins the positives, 0 is an explicit negative
};

// Per-user virtual-rating noise: ceil(ratio * |train_u|) non-interacted
// items with random labels, resampled every round. The dataset itself is
// untouched; callers append the tuples to that round's local training set.
std::vector<std::vector<VirtualRating>> inject_virtual_ratings(
    const InteractionDataset& ds, double ratio, Rng& rng);

// raw_id,dense_index tables for audit.
void export_id_maps_csv(const InteractionDataset& ds,
                        const std::filesystem::path& user_csv,
                        const std::filesystem::path& item_csv);

}  // namespace cofedrec
