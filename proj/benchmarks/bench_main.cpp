#include <benchmark/benchmark.h>

#include "cofedrec/clustering.hpp"
#include "cofedrec/model.hpp"
#include "cofedrec/partition.hpp"

using namespace cofedrec;

namespace {

Mat random_matrix(int n, int d, std::uint64_t seed, double stddev = 0.1) {
  Rng rng(seed);
  Mat m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal(0.0, stddev);
  return m;
}

ItemMembership random_membership(int n, int k, std::uint64_t seed) {
  Rng rng(seed);
  ItemMembership m;
  m.num_clusters = k;
  m.labels.resize(static_cast<std::size_t>(n));
  for (auto& l : m.labels) l = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k)));
  return m;
}

// The dominant per-round cost: one SupContrast loss+gradient evaluation
// over the full catalog. ML-100K shape is n=1682, d=32.
void BM_scl_loss_grad(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int d = 32;
  const Mat V = random_matrix(n, d, 42);
  const auto membership = random_membership(n, std::max(2, n / 56), 7);
  Mat grad = Mat::Zero(n, d);
  SclWorkspace ws;
  for (auto _ : state) {
    grad.setZero();
    auto v = scl_loss_grad(V, membership, 0.1, nullptr, 1.0, grad, ws);
    benchmark::DoNotOptimize(v.loss);
  }
}
BENCHMARK(BM_scl_loss_grad)->Arg(512)->Arg(1682)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_kmeans(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Mat rows = random_matrix(n, 32, 11);
  for (auto _ : state) {
    Rng rng(3);
    auto res = kmeans(rows, 30, rng);
    benchmark::DoNotOptimize(res.objective);
  }
}
BENCHMARK(BM_kmeans)->Arg(1682)->Unit(benchmark::kMillisecond);

void BM_local_train_round(benchmark::State& state) {
  const int items = 1682, d = 32;
  const Mat V0 = random_matrix(items, d, 5);
  const auto membership = random_membership(items, 30, 9);
  LossConfig cfg;

  Rng rng(13);
  std::vector<int> ids, labels;
  for (int j = 0; j < 104; ++j) {
    ids.push_back(static_cast<int>(rng.uniform_index(items)));
    labels.push_back(1);
  }
  for (int j = 0; j < 416; ++j) {
    ids.push_back(static_cast<int>(rng.uniform_index(items)));
    labels.push_back(0);
  }

  SclWorkspace ws;
  for (auto _ : state) {
    Mat V = V0;
    ScoreFunction theta;
    theta.weights = Vec::Constant(d, 0.01);
    theta.bias = 0.0;
    Rng brng(17), trng(19);
    const auto batches = make_batches(ids, labels, cfg.batch_size, brng);
    auto r = local_train(V, theta, batches, &membership, cfg, trng, ws);
    benchmark::DoNotOptimize(r.bce_sum);
  }
}
BENCHMARK(BM_local_train_round)->Unit(benchmark::kMillisecond);

void BM_elbow_split(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(21);
  SimilarityScores s;
  s.core_id = 0;
  for (int i = 0; i < n; ++i) s.scores.emplace_back(i, rng.normal(0.0, 1.0));
  for (auto _ : state) {
    auto split = elbow_split(s);
    benchmark::DoNotOptimize(split.elbow_rank);
  }
}
BENCHMARK(BM_elbow_split)->Arg(943)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
