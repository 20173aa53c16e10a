#include "cofedrec/partition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cofedrec {

SimilarityScores similarity_scores(
    const Mat& core, int core_id,
    const std::vector<std::pair<int, const Mat*>>& participants,
    const std::vector<int>& category_items, int category) {
  if (category_items.empty())
    throw std::invalid_argument("similarity_scores: empty item category");

  SimilarityScores out;
  out.core_id = core_id;
  out.category = category;
  out.scores.reserve(participants.size());

  std::vector<double> core_norms(category_items.size());
  for (std::size_t j = 0; j < category_items.size(); ++j)
    core_norms[j] = core.row(category_items[j]).norm();

  for (const auto& [id, mat] : participants) {
    if (mat->rows() != core.rows() || mat->cols() != core.cols())
      throw std::invalid_argument("similarity_scores: shape mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < category_items.size(); ++j) {
      const int i = category_items[j];
      const double denom = core_norms[j] * mat->row(i).norm();
      if (denom > 0.0) s += core.row(i).dot(mat->row(i)) / denom;
    }
    out.scores.emplace_back(id, s);
  }
  return out;
}

GroupSplit elbow_split(const SimilarityScores& scores) {
  const std::size_t n = scores.scores.size();
  if (n == 0) throw std::invalid_argument("elbow_split: no participants");

  // Sort descending by score, ties by ascending client id.
  std::vector<std::pair<int, double>> sorted(scores.scores);
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  GroupSplit out;
  out.sorted_scores.reserve(n);
  for (const auto& [id, s] : sorted) out.sorted_scores.push_back(s);

  const double s_max = out.sorted_scores.front();
  const double s_min = out.sorted_scores.back();

  std::size_t elbow = 0;
  if (n < 2) {
    out.degenerate = true;
    elbow = n - 1;  // everyone similar
  } else if (s_max == s_min) {
    out.degenerate = true;
    elbow = n - 1;
  } else {
    // Normalized points p_j = (j/(n-1), (s_j - s_min)/(s_max - s_min)).
    // The chord always runs (0,1) -> (1,0), so the perpendicular distance
    // reduces to |x + y - 1| / sqrt(2); the constant factor cannot change
    // the argmax and is dropped.
    double best = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = static_cast<double>(j) / static_cast<double>(n - 1);
      const double y = (out.sorted_scores[j] - s_min) / (s_max - s_min);
      const double d = std::fabs(x + y - 1.0);
      if (d > best) {
        best = d;
        elbow = j;
      }
    }
  }

  out.elbow_rank = static_cast<int>(elbow);
  for (std::size_t j = 0; j < n; ++j)
    (j <= elbow ? out.similar : out.dissimilar).push_back(sorted[j].first);

  // The core always joins the similar group. Its self-similarity is the
  // maximum raw score, so pulling it forward can only move it across a
  // run of exact ties and never breaks the score ordering.
  if (scores.core_id >= 0) {
    auto it = std::find(out.dissimilar.begin(), out.dissimilar.end(), scores.core_id);
    if (it != out.dissimilar.end()) {
      out.dissimilar.erase(it);
      out.similar.push_back(scores.core_id);
    }
  }

  std::sort(out.similar.begin(), out.similar.end());
  std::sort(out.dissimilar.begin(), out.dissimilar.end());
  return out;
}

namespace {

Mat mean_by_ascending_id(const std::vector<std::pair<int, const Mat*>>& members,
                         const char* what) {
  if (members.empty()) throw std::invalid_argument(std::string(what) + ": empty member list");

  std::vector<std::size_t> order(members.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return members[a].first < members[b].first;
  });

  const Mat& first = *members[order[0]].second;
  Mat acc = Mat::Zero(first.rows(), first.cols());
  for (std::size_t idx : order) {
    const Mat& m = *members[idx].second;
    if (m.rows() != first.rows() || m.cols() != first.cols())
      throw std::invalid_argument(std::string(what) + ": shape mismatch");
    acc += m;
  }
  acc /= static_cast<double>(members.size());
  return acc;
}

}  // namespace

Mat group_aggregate(const std::vector<std::pair<int, const Mat*>>& members) {
  return mean_by_ascending_id(members, "group_aggregate");
}

Mat global_aggregate(const std::vector<std::pair<int, const Mat*>>& participants) {
  return mean_by_ascending_id(participants, "global_aggregate");
}

}  // namespace cofedrec
