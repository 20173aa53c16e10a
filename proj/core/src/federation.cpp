#include "cofedrec/federation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace cofedrec {

namespace {

using nlohmann::json;

// Shared initialization scale: zero-mean normal with variance 0.01.
constexpr double kInitStddev = 0.1;

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static-free work queue; items are independent so any interleaving yields
// the same states. Exceptions are collected and rethrown on the caller.
template <typename F>
void parallel_for_each(const std::vector<int>& items, int workers, F&& fn) {
  if (workers <= 1 || items.size() <= 1) {
    for (int item : items) fn(item, 0);
    return;
  }
  const int w = std::min<int>(workers, static_cast<int>(items.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(w));
  for (int k = 0; k < w; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= items.size()) break;
          fn(items[i], k);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

RoundConfig ablation_mode(RoundConfig base, Ablation mode) {
  switch (mode) {
    case Ablation::full:
      return base;
    case Ablation::origin:
      base.distribute = DistributeMode::global;
      base.loss.variant = SclVariant::none;
      base.loss.lambda = 0.0;
      return base;
    case Ablation::user_p:
      base.distribute = DistributeMode::group;
      base.loss.variant = SclVariant::none;
      base.loss.lambda = 0.0;
      return base;
    case Ablation::item_s:
      base.distribute = DistributeMode::global;
      base.loss.variant = SclVariant::item_s;
      return base;
    case Ablation::item_sc:
      base.distribute = DistributeMode::global;
      base.loss.variant = SclVariant::supcontrast;
      return base;
  }
  throw std::invalid_argument("ablation_mode: unknown mode");
}

Ablation parse_ablation(const std::string& name) {
  if (name == "full") return Ablation::full;
  if (name == "origin") return Ablation::origin;
  if (name == "user_p") return Ablation::user_p;
  if (name == "item_s") return Ablation::item_s;
  if (name == "item_sc") return Ablation::item_sc;
  throw std::invalid_argument("unknown ablation mode: " + name);
}

std::string serialize_server_state(const ServerState& s) {
  json j;
  j["round"] = s.round;
  j["has_membership"] = s.has_membership;
  j["membership"] = s.membership.labels;
  j["num_clusters"] = s.membership.num_clusters;
  auto dump = [](const Mat& m) {
    std::vector<double> v(m.data(), m.data() + m.size());
    return v;
  };
  j["V_s"] = dump(s.V_s);
  j["V_g"] = dump(s.V_g);
  return j.dump();
}

Simulation::Simulation(const InteractionDataset& ds, RoundConfig cfg, std::uint64_t seed)
    : ds_(ds), cfg_(cfg), seed_(seed) {
  if (ds_.num_users < 2) throw std::invalid_argument("simulation: need at least 2 clients");
  if (cfg_.participant_fraction <= 0.0 || cfg_.participant_fraction > 1.0)
    throw std::invalid_argument("simulation: participant_fraction must be in (0, 1]");
  if (static_cast<int>(std::llround(cfg_.participant_fraction * ds_.num_users)) < 2)
    throw std::invalid_argument("simulation: participant_fraction * num_users must be >= 2");
  if (cfg_.item_clusters < 1 || cfg_.item_clusters > ds_.num_items)
    throw std::invalid_argument("simulation: item_clusters out of range");
  if (cfg_.embedding_dim < 1) throw std::invalid_argument("simulation: embedding_dim must be >= 1");
  if (cfg_.eval_cadence < 1) throw std::invalid_argument("simulation: eval_cadence must be >= 1");
  if (cfg_.loss.learning_rate <= 0.0)
    throw std::invalid_argument("simulation: learning rate must be positive");
  if (cfg_.loss.tau <= 0.0) throw std::invalid_argument("simulation: tau must be positive");
  if (cfg_.loss.local_epochs < 1)
    throw std::invalid_argument("simulation: local_epochs must be >= 1");

  init_clients();

  Rng test_rng = derive_rng(seed_, stream::kEvalCandidates);
  test_candidates_ = build_eval_candidates(ds_, cfg_.eval_mode, test_rng, EvalSplit::test);
  Rng val_rng = derive_rng(seed_, stream::kValCandidates);
  val_candidates_ = build_eval_candidates(ds_, cfg_.eval_mode, val_rng, EvalSplit::validation);
}

void Simulation::init_clients() {
  const Eigen::Index n = ds_.num_items;
  const Eigen::Index d = cfg_.embedding_dim;

  Rng init_rng = derive_rng(seed_, stream::kInit);
  Mat V0(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) V0(i, j) = init_rng.normal(0.0, kInitStddev);

  server_.round = 0;
  server_.V_s = V0;
  server_.V_g = V0;
  server_.has_membership = false;

  // One shared initial model: every client starts from the same embedding
  // matrix and the same score function, then personalizes locally.
  Rng theta_rng = derive_rng(seed_, stream::kTheta);
  Vec w0(d);
  for (Eigen::Index j = 0; j < d; ++j) w0[j] = theta_rng.normal(0.0, kInitStddev);

  clients_.resize(static_cast<std::size_t>(ds_.num_users));
  for (int u = 0; u < ds_.num_users; ++u) {
    auto& c = clients_[static_cast<std::size_t>(u)];
    c.id = u;
    c.V = V0;
    c.theta.weights = w0;
    c.theta.bias = 0.0;
  }
}

std::vector<int> Simulation::sample_participants(int round) {
  const int count = std::min<int>(
      ds_.num_users,
      std::max<int>(2, static_cast<int>(std::llround(cfg_.participant_fraction * ds_.num_users))));
  std::vector<int> ids(static_cast<std::size_t>(ds_.num_users));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  Rng rng = derive_rng(seed_, stream::kParticipants, static_cast<std::uint64_t>(round));
  rng.partial_shuffle(ids, static_cast<std::size_t>(count));
  ids.resize(static_cast<std::size_t>(count));
  std::sort(ids.begin(), ids.end());
  return ids;
}

RoundRecord Simulation::round_step() {
  const int t = server_.round;
  RoundRecord rec;
  rec.round = t;

  const std::vector<int> participants = sample_participants(t);
  rec.num_participants = static_cast<int>(participants.size());
  rec.participant_ids = participants;

  // Per-user virtual-rating noise for this round, drawn on a dedicated
  // stream so client streams stay aligned across configurations.
  std::vector<std::vector<VirtualRating>> virtual_tuples;
  if (cfg_.virtual_ratio > 0.0) {
    Rng vr_rng = derive_rng(seed_, stream::kVirtual, static_cast<std::uint64_t>(t));
    virtual_tuples = inject_virtual_ratings(ds_, cfg_.virtual_ratio, vr_rng);
  }

  const ItemMembership* membership = server_.has_membership ? &server_.membership : nullptr;

  const int workers = resolve_workers(cfg_.workers);
  std::vector<SclWorkspace> workspaces(static_cast<std::size_t>(workers));
  std::vector<std::uint8_t> diverged(participants.size(), 0);
  std::vector<std::uint8_t> exhausted(participants.size(), 0);
  std::vector<double> bce(participants.size(), 0.0);
  std::vector<double> variant(participants.size(), 0.0);

  parallel_for_each(
      [&] {
        std::vector<int> idx(participants.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        return idx;
      }(),
      workers,
      [&](int pi, int worker) {
        const int u = participants[static_cast<std::size_t>(pi)];
        auto& client = clients_[static_cast<std::size_t>(u)];
        Rng crng = derive_rng(seed_, stream::kClient, static_cast<std::uint64_t>(u),
                              static_cast<std::uint64_t>(t));

        std::vector<int> items = ds_.train[static_cast<std::size_t>(u)];
        std::vector<int> labels(items.size(), 1);
        std::vector<int> virtual_negatives;
        if (!virtual_tuples.empty()) {
          for (const auto& vr : virtual_tuples[static_cast<std::size_t>(u)]) {
            items.push_back(vr.item);
            labels.push_back(vr.label);
            if (vr.label == 0) virtual_negatives.push_back(vr.item);
          }
          std::sort(virtual_negatives.begin(), virtual_negatives.end());
        }

        NegativeSample negs =
            sample_train_negatives(ds_, u, cfg_.num_negatives, crng, virtual_negatives);
        exhausted[static_cast<std::size_t>(pi)] = negs.with_replacement ? 1 : 0;
        items.insert(items.end(), negs.items.begin(), negs.items.end());
        labels.insert(labels.end(), negs.items.size(), 0);

        const auto batches = make_batches(items, labels, cfg_.loss.batch_size, crng);
        LocalTrainResult r = local_train(client.V, client.theta, batches, membership,
                                         cfg_.loss, crng, workspaces[static_cast<std::size_t>(worker)]);
        diverged[static_cast<std::size_t>(pi)] = r.diverged ? 1 : 0;
        bce[static_cast<std::size_t>(pi)] = r.bce_sum;
        variant[static_cast<std::size_t>(pi)] = r.variant_sum;
      });

  std::vector<int> uploaders;
  uploaders.reserve(participants.size());
  for (std::size_t pi = 0; pi < participants.size(); ++pi) {
    if (diverged[pi]) {
      ++rec.diverged_clients;
    } else {
      uploaders.push_back(participants[pi]);
    }
    rec.negative_pool_exhausted += exhausted[pi];
    rec.bce_mean += bce[pi];
    rec.variant_mean += variant[pi];
  }
  if (!participants.empty()) {
    rec.bce_mean /= static_cast<double>(participants.size());
    rec.variant_mean /= static_cast<double>(participants.size());
  }

  for (int u : participants) ++clients_[static_cast<std::size_t>(u)].participation_count;

  if (uploaders.empty()) {
    // Every participant diverged; nothing to aggregate this round.
    server_.round = t + 1;
    return rec;
  }

  std::vector<std::pair<int, const Mat*>> uploads;
  uploads.reserve(uploaders.size());
  for (int u : uploaders) uploads.emplace_back(u, &clients_[static_cast<std::size_t>(u)].V);

  server_.V_g = global_aggregate(uploads);

  const bool need_membership =
      cfg_.distribute == DistributeMode::group || cfg_.loss.variant != SclVariant::none;
  if (need_membership) {
    Rng km_rng = derive_rng(seed_, stream::kKmeans, static_cast<std::uint64_t>(t));
    KMeansResult km = kmeans(server_.V_g, cfg_.item_clusters, km_rng, cfg_.kmeans_max_iters,
                             cfg_.kmeans_tol);
    server_.membership = std::move(km.membership);
    server_.has_membership = true;
  }

  std::vector<int> similar;
  if (cfg_.distribute == DistributeMode::group) {
    const std::vector<int> eligible = clusters_with_min_size(server_.membership, 2);
    if (eligible.empty()) {
      rec.fallback_global = true;
      similar = uploaders;
      server_.V_s = server_.V_g;
      for (int u : similar) clients_[static_cast<std::size_t>(u)].V = server_.V_s;
    } else {
      Rng srv_rng = derive_rng(seed_, stream::kServer, static_cast<std::uint64_t>(t));
      const int core = uploaders[srv_rng.uniform_index(uploaders.size())];
      const int category =
          eligible[srv_rng.uniform_index(eligible.size())];
      const std::vector<int> cat_items = category_items(server_.membership, category);

      const SimilarityScores scores = similarity_scores(
          clients_[static_cast<std::size_t>(core)].V, core, uploads, cat_items, category);
      const GroupSplit split = elbow_split(scores);
      {
        // Client ids in descending-score order, for ordering audits.
        std::vector<std::pair<int, double>> by_score(scores.scores);
        std::sort(by_score.begin(), by_score.end(), [](const auto& a, const auto& b) {
          if (a.second != b.second) return a.second > b.second;
          return a.first < b.first;
        });
        rec.sorted_ids.reserve(by_score.size());
        for (const auto& [id, sc] : by_score) rec.sorted_ids.push_back(id);
      }

      std::vector<std::pair<int, const Mat*>> members;
      members.reserve(split.similar.size());
      for (int u : split.similar)
        members.emplace_back(u, &clients_[static_cast<std::size_t>(u)].V);
      server_.V_s = group_aggregate(members);
      for (int u : split.similar) clients_[static_cast<std::size_t>(u)].V = server_.V_s;

      similar = split.similar;
      rec.core = core;
      rec.category = category;
      rec.elbow_rank = split.elbow_rank;
      rec.sorted_scores = split.sorted_scores;
    }
  } else {
    similar = uploaders;
    server_.V_s = server_.V_g;
    for (int u : similar) clients_[static_cast<std::size_t>(u)].V = server_.V_s;
  }

  for (int u : similar) ++clients_[static_cast<std::size_t>(u)].similar_group_count;
  rec.num_similar = static_cast<int>(similar.size());
  rec.num_dissimilar = rec.num_participants - rec.diverged_clients - rec.num_similar;
  rec.similar_ids = similar;
  last_similar_ = std::move(similar);

  const std::uint64_t model_bytes =
      static_cast<std::uint64_t>(ds_.num_items) * static_cast<std::uint64_t>(cfg_.embedding_dim) * 8u;
  rec.bytes_up = static_cast<std::uint64_t>(rec.num_participants) * model_bytes;
  rec.bytes_down = static_cast<std::uint64_t>(rec.num_similar) * model_bytes;
  if (need_membership)
    rec.bytes_down += static_cast<std::uint64_t>(rec.num_participants) *
                      static_cast<std::uint64_t>(ds_.num_items) * 4u;

  server_.round = t + 1;
  return rec;
}

EvalRecord Simulation::evaluate() {
  std::vector<ClientModelView> views(clients_.size());
  for (std::size_t u = 0; u < clients_.size(); ++u)
    views[u] = {&clients_[u].V, &clients_[u].theta};

  EvalRecord rec;
  rec.round = server_.round;
  rec.validation = evaluate_split(ds_, views, val_candidates_, EvalSplit::validation,
                                  cfg_.eval_top_k);
  rec.test = evaluate_split(ds_, views, test_candidates_, EvalSplit::test, cfg_.eval_top_k);
  return rec;
}

RunReport Simulation::run(std::ostream* log, std::ostream* progress) {
  RunReport rep;

  auto log_round = [&](const RoundRecord& r) {
    if (!log) return;
    json j;
    j["type"] = "round";
    j["round"] = r.round;
    j["participants"] = r.num_participants;
    j["core"] = r.core;
    j["category"] = r.category;
    j["elbow_rank"] = r.elbow_rank;
    j["similar"] = r.num_similar;
    j["dissimilar"] = r.num_dissimilar;
    j["similar_ids"] = r.similar_ids;
    j["scores"] = r.sorted_scores;
    j["fallback_global"] = r.fallback_global;
    j["diverged"] = r.diverged_clients;
    j["neg_with_replacement"] = r.negative_pool_exhausted;
    j["bce_mean"] = r.bce_mean;
    j["variant_mean"] = r.variant_mean;
    j["bytes_up"] = r.bytes_up;
    j["bytes_down"] = r.bytes_down;
    (*log) << j.dump() << "\n";
  };
  auto log_eval = [&](const EvalRecord& e) {
    if (!log) return;
    json j;
    j["type"] = "eval";
    j["round"] = e.round;
    j["k"] = cfg_.eval_top_k;
    j["mode"] = cfg_.eval_mode == EvalMode::sampled ? "sampled" : "full_rank";
    j["validation_hr"] = e.validation.hr;
    j["validation_ndcg"] = e.validation.ndcg;
    j["test_hr"] = e.test.hr;
    j["test_ndcg"] = e.test.ndcg;
    (*log) << j.dump() << "\n";
  };

  auto consider_best = [&](const EvalRecord& ev) {
    if (rep.best_round >= 0 && ev.validation.hr <= rep.best_validation.hr) return;
    rep.best_round = ev.round;
    rep.best_validation = ev.validation;
    rep.best_test = ev.test;
    best_round_ = ev.round;
    if (cfg_.track_best_state) {
      best_models_.resize(clients_.size());
      best_thetas_.resize(clients_.size());
      for (std::size_t u = 0; u < clients_.size(); ++u) {
        best_models_[u] = clients_[u].V;
        best_thetas_[u] = clients_[u].theta;
      }
    }
  };

  if (cfg_.total_rounds == 0) {
    EvalRecord ev = evaluate();
    rep.evals.push_back(ev);
    log_eval(ev);
    consider_best(ev);
  }

  for (int t = 0; t < cfg_.total_rounds; ++t) {
    RoundRecord rec = round_step();
    rep.total_bytes_up += rec.bytes_up;
    rep.total_bytes_down += rec.bytes_down;
    log_round(rec);
    rep.rounds.push_back(std::move(rec));

    if ((t + 1) % cfg_.eval_cadence == 0 || t + 1 == cfg_.total_rounds) {
      EvalRecord ev = evaluate();
      rep.evals.push_back(ev);
      log_eval(ev);
      consider_best(ev);
      if (progress)
        (*progress) << "round " << ev.round << "/" << cfg_.total_rounds
                    << " val_hr=" << ev.validation.hr << " test_hr=" << ev.test.hr
                    << " best=" << rep.best_round << std::endl;
    }
  }

  rep.participation_count.resize(clients_.size());
  rep.similar_group_count.resize(clients_.size());
  for (std::size_t u = 0; u < clients_.size(); ++u) {
    rep.participation_count[u] = clients_[u].participation_count;
    rep.similar_group_count[u] = clients_[u].similar_group_count;
  }
  return rep;
}

std::vector<int> diagnose_client_kmeans(const std::vector<const Mat*>& client_models,
                                        int k, Rng& rng) {
  if (client_models.empty())
    throw std::invalid_argument("diagnose_client_kmeans: no client models");
  if (static_cast<std::size_t>(k) > client_models.size())
    throw std::invalid_argument("diagnose_client_kmeans: k exceeds client count");

  const Eigen::Index flat = client_models.front()->size();
  Mat rows(static_cast<Eigen::Index>(client_models.size()), flat);
  for (std::size_t u = 0; u < client_models.size(); ++u) {
    const Mat& m = *client_models[u];
    if (m.size() != flat)
      throw std::invalid_argument("diagnose_client_kmeans: model shape mismatch");
    rows.row(static_cast<Eigen::Index>(u)) =
        Eigen::Map<const Eigen::RowVectorXd>(m.data(), flat);
  }

  KMeansResult km = kmeans(rows, k, rng);
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int label : km.membership.labels) ++sizes[static_cast<std::size_t>(label)];
  return sizes;
}

}  // namespace cofedrec
