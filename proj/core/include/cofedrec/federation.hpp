#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cofedrec/clustering.hpp"
#include "cofedrec/dataset.hpp"
#include "cofedrec/eval.hpp"
#include "cofedrec/matrix.hpp"
#include "cofedrec/model.hpp"
#include "cofedrec/partition.hpp"
#include "cofedrec/rng.hpp"

namespace cofedrec {

enum class DistributeMode { group, global };
enum class Ablation { full, origin, user_p, item_s, item_sc };

struct RoundConfig {
  int total_rounds = 100;
  double participant_fraction = 1.0;
  int item_clusters = 30;
  int embedding_dim = 32;
  LossConfig loss;
  int num_negatives = 4;
  double virtual_ratio = 0.0;
  int eval_cadence = 1;
  int eval_top_k = 10;
  EvalMode eval_mode = EvalMode::sampled;
  DistributeMode distribute = DistributeMode::group;
  int workers = 1;              // parallel client-training threads
  bool track_best_state = true; // snapshot client models at the best round
  int kmeans_max_iters = 100;
  double kmeans_tol = 1e-6;
};

// Switches for the component study. `origin` is the plain backbone
// (global aggregation, no contrastive term); `user_p` adds only the
// co-clustering; `item_s` / `item_sc` add only the similarity or
// SupContrast term on top of global aggregation; `full` is the whole
// mechanism.
RoundConfig ablation_mode(RoundConfig base, Ablation mode);

Ablation parse_ablation(const std::string& name);

struct ClientState {
  int id = -1;
  Mat V;
  ScoreFunction theta;  // private; never reachable from ServerState
  int participation_count = 0;
  int similar_group_count = 0;
};

// Everything the server legitimately holds between rounds. Keeping this a
// plain value type (no references into clients) is what the privacy audit
// serializes and inspects.
struct ServerState {
  int round = 0;
  Mat V_s;  // current group model (V_0 before any round)
  Mat V_g;  // latest global aggregation
  ItemMembership membership;
  bool has_membership = false;
};

std::string serialize_server_state(const ServerState& s);

struct RoundRecord {
  int round = 0;
  int num_participants = 0;
  int core = -1;
  int category = -1;
  int elbow_rank = -1;
  int num_similar = 0;
  int num_dissimilar = 0;
  std::vector<int> participant_ids;    // ascending (kept in memory, not logged)
  std::vector<int> similar_ids;        // ascending
  std::vector<double> sorted_scores;   // descending; empty in global modes
  std::vector<int> sorted_ids;         // client ids in descending-score order
  bool fallback_global = false;        // no category had >= 2 items
  int diverged_clients = 0;
  int negative_pool_exhausted = 0;     // clients that sampled with replacement
  double bce_mean = 0.0;
  double variant_mean = 0.0;
  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;
};

struct EvalRecord {
  int round = 0;  // rounds completed when measured
  MetricPair validation;
  MetricPair test;
};

struct RunReport {
  std::vector<RoundRecord> rounds;
  std::vector<EvalRecord> evals;
  int best_round = -1;
  MetricPair best_validation;
  MetricPair best_test;
  std::vector<int> participation_count;   // per client
  std::vector<int> similar_group_count;   // per client
  std::uint64_t total_bytes_up = 0;
  std::uint64_t total_bytes_down = 0;
};

// Single-process simulator of the whole protocol. Owns the server state
// and every client's state; client training runs on `workers` threads with
// per-(client, round) RNG streams, so results are bit-identical for any
// worker count.
class Simulation {
 public:
  Simulation(const InteractionDataset& ds, RoundConfig cfg, std::uint64_t seed);

  // One communication round: sample participants, local training, global
  // aggregation + item clustering, core/category draw, elbow split, group
  // aggregation and distribution.
  RoundRecord round_step();

  // Ranks validation and test items with every client's current model.
  EvalRecord evaluate();

  // Full protocol: total_rounds round_steps with evaluation at the
  // configured cadence, tracking the best-validation round. Pass `log` to
  // receive newline-delimited JSON records as the run progresses and
  // `progress` for a human-readable line per evaluation.
  RunReport run(std::ostream* log = nullptr, std::ostream* progress = nullptr);

  const ServerState& server() const { return server_; }
  const std::vector<ClientState>& clients() const { return clients_; }
  const RoundConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }

  // Best-round snapshot (available when cfg.track_best_state and run()
  // completed at least one evaluation).
  const std::vector<Mat>& best_models() const { return best_models_; }
  const std::vector<ScoreFunction>& best_thetas() const { return best_thetas_; }
  int best_round() const { return best_round_; }

 private:
  void init_clients();
  std::vector<int> sample_participants(int round);

  const InteractionDataset& ds_;
  RoundConfig cfg_;
  std::uint64_t seed_;
  ServerState server_;
  std::vector<ClientState> clients_;
  std::vector<int> last_similar_;  // D_s of the previous round (client ids)
  EvalCandidates test_candidates_;
  EvalCandidates val_candidates_;
  std::vector<Mat> best_models_;
  std::vector<ScoreFunction> best_thetas_;
  int best_round_ = -1;
};

// The failure-demonstration diagnostic: K-Means over flattened per-client
// models. Returns cluster sizes indexed by cluster id.
std::vector<int> diagnose_client_kmeans(const std::vector<const Mat*>& client_models,
                                        int k, Rng& rng);

}  // namespace cofedrec
