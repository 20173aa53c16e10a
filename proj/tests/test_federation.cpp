#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "cofedrec/federation.hpp"
#include "synthetic.hpp"

using namespace cofedrec;

namespace {

InteractionDataset small_dataset(std::uint64_t seed = 1, int users = 30, int items = 40) {
  return build_splits(testutil::random_ratings(users, items, 6, 14, seed), 5);
}

RoundConfig small_config() {
  RoundConfig cfg;
  cfg.total_rounds = 6;
  cfg.embedding_dim = 4;
  cfg.item_clusters = 3;
  cfg.loss.lambda = 0.02;
  cfg.loss.tau = 0.5;
  cfg.loss.batch_size = 32;
  cfg.track_best_state = false;
  return cfg;
}

bool states_equal(const std::vector<ClientState>& a, const std::vector<ClientState>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t u = 0; u < a.size(); ++u) {
    if (!(a[u].V.array() == b[u].V.array()).all()) return false;
    if (!(a[u].theta.weights.array() == b[u].theta.weights.array()).all()) return false;
    if (a[u].theta.bias != b[u].theta.bias) return false;
    if (a[u].participation_count != b[u].participation_count) return false;
    if (a[u].similar_group_count != b[u].similar_group_count) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("federation") {

TEST_CASE("rounds=0 yields an initial-model evaluation only") {
  const auto ds = small_dataset();
  auto cfg = small_config();
  cfg.total_rounds = 0;
  Simulation sim(ds, cfg, 5);
  const auto rep = sim.run();
  CHECK(rep.rounds.empty());
  REQUIRE(rep.evals.size() == 1);
  CHECK(rep.evals[0].round == 0);
  CHECK(rep.best_round == 0);
}

TEST_CASE("all clients start from the shared initialization") {
  const auto ds = small_dataset();
  Simulation sim(ds, small_config(), 7);
  const auto& server = sim.server();
  CHECK(server.round == 0);
  CHECK_FALSE(server.has_membership);
  for (const auto& c : sim.clients())
    CHECK((c.V.array() == server.V_s.array()).all());
}

TEST_CASE("identical seeds give bit-identical runs at any worker count") {
  const auto ds = small_dataset();
  auto cfg1 = small_config();
  cfg1.workers = 1;
  auto cfg3 = small_config();
  cfg3.workers = 3;

  Simulation a(ds, cfg1, 42);
  const auto ra = a.run();
  Simulation b(ds, cfg3, 42);
  const auto rb = b.run();

  CHECK(states_equal(a.clients(), b.clients()));
  REQUIRE(ra.evals.size() == rb.evals.size());
  for (std::size_t i = 0; i < ra.evals.size(); ++i) {
    CHECK(ra.evals[i].validation.hr == rb.evals[i].validation.hr);
    CHECK(ra.evals[i].test.ndcg == rb.evals[i].test.ndcg);
  }
  REQUIRE(ra.rounds.size() == rb.rounds.size());
  for (std::size_t i = 0; i < ra.rounds.size(); ++i) {
    CHECK(ra.rounds[i].similar_ids == rb.rounds[i].similar_ids);
    CHECK(ra.rounds[i].core == rb.rounds[i].core);
  }

  Simulation c(ds, cfg1, 43);
  const auto rc = c.run();
  CHECK_FALSE(states_equal(a.clients(), c.clients()));
}

TEST_CASE("full participation counts every client every round") {
  const auto ds = small_dataset();
  auto cfg = small_config();
  cfg.participant_fraction = 1.0;
  cfg.total_rounds = 4;
  Simulation sim(ds, cfg, 3);
  const auto rep = sim.run();
  for (int n : rep.participation_count) CHECK(n == 4);
}

TEST_CASE("model retention: outside the similar group the cache is untouched") {
  const auto ds = small_dataset(2, 40, 50);
  auto cfg = small_config();
  cfg.participant_fraction = 0.5;
  cfg.total_rounds = 1;
  Simulation sim(ds, cfg, 11);

  std::vector<Mat> before;
  for (const auto& c : sim.clients()) before.push_back(c.V);

  const auto rec = sim.round_step();
  std::set<int> participants_or_similar;
  // Reconstruct participation from the counter change.
  for (std::size_t u = 0; u < sim.clients().size(); ++u)
    if (sim.clients()[u].participation_count > 0)
      participants_or_similar.insert(static_cast<int>(u));
  for (int id : rec.similar_ids) participants_or_similar.insert(id);

  for (std::size_t u = 0; u < sim.clients().size(); ++u) {
    if (participants_or_similar.count(static_cast<int>(u))) continue;
    CHECK((sim.clients()[u].V.array() == before[u].array()).all());
  }
}

TEST_CASE("counter consistency and byte accounting over many rounds") {
  const auto ds = small_dataset(3, 50, 60);
  auto cfg = small_config();
  cfg.participant_fraction = 0.6;
  cfg.total_rounds = 20;
  Simulation sim(ds, cfg, 13);
  const auto rep = sim.run();

  long total_similar = 0;
  for (const auto& rec : rep.rounds) total_similar += rec.num_similar;
  long counted = 0;
  for (int c : rep.similar_group_count) counted += c;
  CHECK(total_similar == counted);

  const std::uint64_t model_bytes =
      static_cast<std::uint64_t>(ds.num_items) * cfg.embedding_dim * 8;
  for (const auto& rec : rep.rounds) {
    CHECK(rec.bytes_up == static_cast<std::uint64_t>(rec.num_participants) * model_bytes);
    CHECK(rec.bytes_down ==
          static_cast<std::uint64_t>(rec.num_similar) * model_bytes +
              static_cast<std::uint64_t>(rec.num_participants) * ds.num_items * 4);
  }
}

TEST_CASE("partition invariants hold in every round") {
  const auto ds = small_dataset(4, 50, 60);
  auto cfg = small_config();
  cfg.participant_fraction = 0.5;
  cfg.total_rounds = 25;
  Simulation sim(ds, cfg, 17);

  for (int t = 0; t < cfg.total_rounds; ++t) {
    const auto rec = sim.round_step();
    if (rec.fallback_global || rec.core < 0) continue;
    // Disjoint cover of the uploaders.
    CHECK(rec.num_similar + rec.num_dissimilar + rec.diverged_clients ==
          rec.num_participants);
    // Core inclusion.
    CHECK(std::find(rec.similar_ids.begin(), rec.similar_ids.end(), rec.core) !=
          rec.similar_ids.end());
    // Ordering: the score at the elbow bounds the dissimilar side.
    REQUIRE(!rec.sorted_scores.empty());
    const double cut = rec.sorted_scores[static_cast<std::size_t>(rec.elbow_rank)];
    for (std::size_t j = static_cast<std::size_t>(rec.elbow_rank) + 1;
         j < rec.sorted_scores.size(); ++j)
      CHECK(rec.sorted_scores[j] <= cut + 1e-12);
  }
}

TEST_CASE("privacy audit: server state never contains score-function values") {
  const auto ds = small_dataset(5, 20, 30);
  auto cfg = small_config();
  cfg.total_rounds = 3;
  Simulation sim(ds, cfg, 19);

  // Plant needles: distinctive bias values on every client.
  std::vector<double> magics;
  for (std::size_t u = 0; u < sim.clients().size(); ++u) {
    const double magic = 0.123456711 + 1e-6 * static_cast<double>(u);
    const_cast<ClientState&>(sim.clients()[u]).theta.bias = magic;
    magics.push_back(magic);
  }
  for (int t = 0; t < 3; ++t) sim.round_step();

  const std::string dump = serialize_server_state(sim.server());
  CHECK(dump.find("theta") == std::string::npos);
  CHECK(dump.find("weights") == std::string::npos);
  CHECK(dump.find("bias") == std::string::npos);
  for (double magic : magics) {
    std::ostringstream needle;
    needle.precision(17);
    needle << magic;
    CHECK(dump.find(needle.str().substr(0, 12)) == std::string::npos);
  }
}

TEST_CASE("ablation switches") {
  RoundConfig base = small_config();
  base.distribute = DistributeMode::group;
  base.loss.variant = SclVariant::supcontrast;
  base.loss.lambda = 0.01;

  const auto origin = ablation_mode(base, Ablation::origin);
  CHECK(origin.distribute == DistributeMode::global);
  CHECK(origin.loss.variant == SclVariant::none);
  CHECK(origin.loss.lambda == 0.0);

  const auto user_p = ablation_mode(base, Ablation::user_p);
  CHECK(user_p.distribute == DistributeMode::group);
  CHECK(user_p.loss.lambda == 0.0);

  const auto item_s = ablation_mode(base, Ablation::item_s);
  CHECK(item_s.distribute == DistributeMode::global);
  CHECK(item_s.loss.variant == SclVariant::item_s);
  CHECK(item_s.loss.lambda == 0.01);

  const auto item_sc = ablation_mode(base, Ablation::item_sc);
  CHECK(item_sc.distribute == DistributeMode::global);
  CHECK(item_sc.loss.variant == SclVariant::supcontrast);

  const auto full = ablation_mode(base, Ablation::full);
  CHECK(full.distribute == base.distribute);
  CHECK(full.loss.lambda == base.loss.lambda);

  CHECK(parse_ablation("item_sc") == Ablation::item_sc);
  CHECK_THROWS_AS(parse_ablation("bogus"), std::invalid_argument);
}

TEST_CASE("global distribution hands every uploader the global model") {
  const auto ds = small_dataset(6, 20, 30);
  auto cfg = small_config();
  cfg = ablation_mode(cfg, Ablation::origin);
  cfg.total_rounds = 2;
  Simulation sim(ds, cfg, 23);
  sim.round_step();
  const auto& server = sim.server();
  CHECK_FALSE(server.has_membership);  // origin never clusters items
  for (const auto& c : sim.clients())
    CHECK((c.V.array() == server.V_g.array()).all());
}

TEST_CASE("diagnose_client_kmeans separates planted model groups") {
  Rng rng(31);
  Mat base_a(6, 3), base_b(6, 3);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 3; ++j) {
      base_a(i, j) = rng.normal(0.0, 0.1);
      base_b(i, j) = 5.0 + rng.normal(0.0, 0.1);
    }
  std::vector<Mat> models;
  for (int u = 0; u < 8; ++u) models.push_back(u < 4 ? base_a : base_b);
  std::vector<const Mat*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);

  Rng krng(33);
  auto sizes = diagnose_client_kmeans(ptrs, 2, krng);
  std::sort(sizes.begin(), sizes.end());
  CHECK(sizes == std::vector<int>{4, 4});

  // Identical models: one dominant cluster (the rest are reseeded singletons).
  std::vector<const Mat*> same(10, &base_a);
  Rng krng2(35);
  auto sizes2 = diagnose_client_kmeans(same, 3, krng2);
  std::sort(sizes2.begin(), sizes2.end());
  CHECK(sizes2.back() >= 8);
}

TEST_CASE("config validation") {
  const auto ds = small_dataset();
  auto cfg = small_config();
  cfg.participant_fraction = 0.0;
  CHECK_THROWS_AS(Simulation(ds, cfg, 1), std::invalid_argument);
  cfg = small_config();
  cfg.participant_fraction = 0.01;  // 0.01 * 30 users < 2
  CHECK_THROWS_AS(Simulation(ds, cfg, 1), std::invalid_argument);
  cfg = small_config();
  cfg.item_clusters = 10000;
  CHECK_THROWS_AS(Simulation(ds, cfg, 1), std::invalid_argument);
  cfg = small_config();
  cfg.loss.learning_rate = 0.0;
  CHECK_THROWS_AS(Simulation(ds, cfg, 1), std::invalid_argument);
}

}  // TEST_SUITE
