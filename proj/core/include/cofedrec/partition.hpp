#pragma once

#include <utility>
#include <vector>

#include "cofedrec/matrix.hpp"

namespace cofedrec {

// Category-restricted similarity of each participant to the round's core
// client: s_u = sum over category items of cos(core row, participant row).
// Zero-norm rows contribute 0, so the core's self-score equals its count
// of nonzero rows in the category and is maximal.
struct SimilarityScores {
  int core_id = -1;
  int category = -1;
  std::vector<std::pair<int, double>> scores;  // (client id, s_u), input order
};

SimilarityScores similarity_scores(
    const Mat& core, int core_id,
    const std::vector<std::pair<int, const Mat*>>& participants,
    const std::vector<int>& category_items, int category = -1);

// Elbow split of the sorted scores. Ranks are plotted as min-max-normalized
// (rank, score) points; the elbow is the point farthest (perpendicular)
// from the chord joining the first and last point. Clients at ranks up to
// and including the elbow form the similar group.
struct GroupSplit {
  std::vector<int> similar;         // client ids, ascending
  std::vector<int> dissimilar;      // client ids, ascending
  int elbow_rank = 0;
  std::vector<double> sorted_scores;  // descending
  bool degenerate = false;          // all-equal scores or < 2 participants
};

GroupSplit elbow_split(const SimilarityScores& scores);

// Element-wise mean of the members' matrices, reduced in ascending client
// id order so the result is bit-exact under input permutation.
Mat group_aggregate(const std::vector<std::pair<int, const Mat*>>& members);
Mat global_aggregate(const std::vector<std::pair<int, const Mat*>>& participants);

}  // namespace cofedrec
