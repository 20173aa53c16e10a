#pragma once

#include <vector>

#include "cofedrec/dataset.hpp"
#include "cofedrec/matrix.hpp"
#include "cofedrec/model.hpp"

namespace cofedrec {

// 1-based rank of the test item among the candidates, scored with the
// client's model. Ties are pessimistic: an equal-scored non-test candidate
// counts as ranked above the test item.
int rank_among_candidates(const Mat& V, const ScoreFunction& theta,
                          const std::vector<int>& candidates, int test_item);

// Full-rank variant: ranks the test item against every item outside
// `excluded` (sorted ascending; the test item itself is always ranked).
int rank_full(const Mat& V, const ScoreFunction& theta,
              const std::vector<int>& excluded, int test_item);

double hr_at_k(const std::vector<int>& ranks, int k);
double ndcg_at_k(const std::vector<int>& ranks, int k);

struct MetricPair {
  double hr = 0.0;
  double ndcg = 0.0;
};

// Per-user ranking over the whole dataset for one split; `models` supplies
// each user's embedding matrix and private score function.
struct ClientModelView {
  const Mat* V = nullptr;
  const ScoreFunction* theta = nullptr;
};

MetricPair evaluate_split(const InteractionDataset& ds,
                          const std::vector<ClientModelView>& models,
                          const EvalCandidates& candidates, EvalSplit split, int k,
                          std::vector<int>* ranks_out = nullptr);

}  // namespace cofedrec
