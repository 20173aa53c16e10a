#include "cofedrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cofedrec {

int rank_among_candidates(const Mat& V, const ScoreFunction& theta,
                          const std::vector<int>& candidates, int test_item) {
  const auto it = std::find(candidates.begin(), candidates.end(), test_item);
  if (it == candidates.end())
    throw std::invalid_argument("rank_among_candidates: test item not in candidate list");

  const double test_score = predict(theta, V.row(test_item));
  int rank = 1;
  for (int c : candidates) {
    if (c == test_item) continue;
    if (predict(theta, V.row(c)) >= test_score) ++rank;
  }
  return rank;
}

int rank_full(const Mat& V, const ScoreFunction& theta,
              const std::vector<int>& excluded, int test_item) {
  const double test_score = predict(theta, V.row(test_item));
  int rank = 1;
  std::size_t j = 0;
  for (int i = 0; i < V.rows(); ++i) {
    if (j < excluded.size() && excluded[j] == i) {
      ++j;
      continue;
    }
    if (i == test_item) continue;
    if (predict(theta, V.row(i)) >= test_score) ++rank;
  }
  return rank;
}

double hr_at_k(const std::vector<int>& ranks, int k) {
  if (ranks.empty()) throw std::invalid_argument("hr_at_k: empty rank list");
  std::size_t hits = 0;
  for (int r : ranks)
    if (r <= k) ++hits;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double ndcg_at_k(const std::vector<int>& ranks, int k) {
  if (ranks.empty()) throw std::invalid_argument("ndcg_at_k: empty rank list");
  double acc = 0.0;
  for (int r : ranks)
    if (r <= k) acc += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  return acc / static_cast<double>(ranks.size());
}

MetricPair evaluate_split(const InteractionDataset& ds,
                          const std::vector<ClientModelView>& models,
                          const EvalCandidates& candidates, EvalSplit split, int k,
                          std::vector<int>* ranks_out) {
  std::vector<int> ranks;
  ranks.reserve(static_cast<std::size_t>(ds.num_users));

  for (int u = 0; u < ds.num_users; ++u) {
    const std::size_t su = static_cast<std::size_t>(u);
    const int positive = split == EvalSplit::test ? ds.test[su] : ds.validation[su];
    if (positive < 0) continue;
    const auto& m = models[su];

    if (candidates.mode == EvalMode::sampled) {
      ranks.push_back(rank_among_candidates(*m.V, *m.theta, candidates.lists[su], positive));
    } else {
      // Rank against everything except the user's train and validation
      // positives (the test item always stays in the pool).
      std::vector<int> excluded = ds.train[su];
      if (ds.validation[su] >= 0 && ds.validation[su] != positive)
        excluded.push_back(ds.validation[su]);
      std::sort(excluded.begin(), excluded.end());
      ranks.push_back(rank_full(*m.V, *m.theta, excluded, positive));
    }
  }

  MetricPair out;
  out.hr = hr_at_k(ranks, k);
  out.ndcg = ndcg_at_k(ranks, k);
  if (ranks_out) *ranks_out = std::move(ranks);
  return out;
}

}  // namespace cofedrec
