#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "cofedrec/config.hpp"
#include "cofedrec/federation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cofedrec;

namespace {

struct ConfigOverrides {
  std::optional<std::string> data, format, scl_variant, ablation, eval_mode;
  std::optional<int> min_interactions, dim, batch_size, local_epochs, rounds,
      item_clusters, num_negatives, scl_max_items, eval_top_k, eval_cadence;
  std::optional<double> lr, fraction, lambda, tau, virtual_ratio;
  std::optional<std::uint64_t> seed;
};

void add_config_options(CLI::App* cmd, std::string& config_path, ConfigOverrides& o) {
  cmd->add_option("-c,--config", config_path, "experiment config file (key = value)");
  cmd->add_option("--data", o.data, "rating file path");
  cmd->add_option("--format", o.format, "rating file format: auto|dat|csv");
  cmd->add_option("--min-interactions", o.min_interactions, "drop users with fewer interactions");
  cmd->add_option("--dim", o.dim, "embedding dimension");
  cmd->add_option("--lr", o.lr, "SGD learning rate");
  cmd->add_option("--batch-size", o.batch_size, "local batch size");
  cmd->add_option("--local-epochs", o.local_epochs, "local epochs per round");
  cmd->add_option("--rounds", o.rounds, "communication rounds");
  cmd->add_option("--fraction", o.fraction, "participant fraction per round");
  cmd->add_option("--item-clusters", o.item_clusters, "K for the server-side item clustering");
  cmd->add_option("--lambda", o.lambda, "weight of the contrastive term");
  cmd->add_option("--tau", o.tau, "SupContrast temperature");
  cmd->add_option("--scl-variant", o.scl_variant, "supcontrast|item_s|none");
  cmd->add_option("--ablation", o.ablation, "full|origin|user_p|item_s|item_sc");
  cmd->add_option("--virtual-ratio", o.virtual_ratio, "virtual-rating noise ratio [0,0.5]");
  cmd->add_option("--num-negatives", o.num_negatives, "training negatives per positive");
  cmd->add_option("--scl-max-items", o.scl_max_items, "item subsample cap for the contrastive term");
  cmd->add_option("--top-k", o.eval_top_k, "ranking cutoff K");
  cmd->add_option("--eval-mode", o.eval_mode, "sampled|full_rank");
  cmd->add_option("--eval-cadence", o.eval_cadence, "evaluate every N rounds");
  cmd->add_option("--seed", o.seed, "master seed");
}

ExperimentConfig resolve_config(const std::string& config_path, const ConfigOverrides& o) {
  ExperimentConfig c;
  if (!config_path.empty()) c = load_config_file(config_path);
  if (o.data) c.dataset_path = *o.data;
  if (o.format) c.dataset_format = *o.format;
  if (o.min_interactions) c.min_interactions = *o.min_interactions;
  if (o.dim) c.dim = *o.dim;
  if (o.lr) c.lr = *o.lr;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.local_epochs) c.local_epochs = *o.local_epochs;
  if (o.rounds) c.rounds = *o.rounds;
  if (o.fraction) c.participant_fraction = *o.fraction;
  if (o.item_clusters) c.item_clusters = *o.item_clusters;
  if (o.lambda) c.lambda = *o.lambda;
  if (o.tau) c.tau = *o.tau;
  if (o.scl_variant) c.scl_variant = *o.scl_variant;
  if (o.ablation) c.ablation = *o.ablation;
  if (o.virtual_ratio) c.virtual_ratio = *o.virtual_ratio;
  if (o.num_negatives) c.num_negatives = *o.num_negatives;
  if (o.scl_max_items) c.scl_max_items = *o.scl_max_items;
  if (o.eval_top_k) c.eval_top_k = *o.eval_top_k;
  if (o.eval_mode) c.eval_mode = *o.eval_mode;
  if (o.eval_cadence) c.eval_cadence = *o.eval_cadence;
  if (o.seed) c.seed = *o.seed;
  if (c.dataset_path.empty())
    throw std::invalid_argument("no dataset path (use --data or dataset.path in the config)");
  return c;
}

InteractionDataset load_dataset(const ExperimentConfig& c) {
  LoadStats stats;
  auto ratings = load_movielens(c.dataset_path, parse_rating_format(c.dataset_format), &stats);
  auto ds = build_splits(ratings, c.min_interactions);
  std::cerr << "dataset: " << ds.num_users << " users, " << ds.num_items << " items, "
            << ds.total_train() << " train interactions";
  if (stats.malformed_lines) std::cerr << ", " << stats.malformed_lines << " malformed lines";
  std::cerr << "\n";
  for (const auto& w : ds.warnings) std::cerr << "warning: " << w << "\n";
  return ds;
}

void write_metrics_csv(const fs::path& path, const ExperimentConfig& c,
                       const RunReport& rep) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# config=" << config_hash(c) << " seed=" << c.seed << "\n";
  out << "round,split,hr,ndcg\n";
  for (const auto& ev : rep.evals) {
    out << ev.round << ",validation," << format_double(ev.validation.hr) << ","
        << format_double(ev.validation.ndcg) << "\n";
    out << ev.round << ",test," << format_double(ev.test.hr) << ","
        << format_double(ev.test.ndcg) << "\n";
  }
}

json summary_json(const ExperimentConfig& c, const InteractionDataset& ds,
                  const RunReport& rep) {
  json s;
  s["config_hash"] = config_hash(c);
  s["seed"] = c.seed;
  s["num_users"] = ds.num_users;
  s["num_items"] = ds.num_items;
  s["rounds"] = c.rounds;
  s["best_round"] = rep.best_round;
  s["validation_hr"] = rep.best_validation.hr;
  s["validation_ndcg"] = rep.best_validation.ndcg;
  s["test_hr"] = rep.best_test.hr;
  s["test_ndcg"] = rep.best_test.ndcg;
  s["total_bytes_up"] = rep.total_bytes_up;
  s["total_bytes_down"] = rep.total_bytes_down;
  return s;
}

int cmd_run(const ExperimentConfig& cfg, const fs::path& out_dir, int workers,
            bool checkpoint) {
  const auto ds = load_dataset(cfg);
  fs::create_directories(out_dir);

  {
    std::ofstream cf(out_dir / "config.cfg");
    if (!cf) throw std::runtime_error("cannot write config.cfg");
    cf << serialize_config(cfg);
  }

  std::ofstream log(out_dir / "run_log.jsonl");
  if (!log) throw std::runtime_error("cannot write run_log.jsonl");
  {
    json j;
    j["type"] = "config";
    j["hash"] = config_hash(cfg);
    j["seed"] = cfg.seed;
    log << j.dump() << "\n";
  }

  Simulation sim(ds, to_round_config(cfg, workers, checkpoint), cfg.seed);
  RunReport rep = sim.run(&log, &std::cerr);

  write_metrics_csv(out_dir / "metrics.csv", cfg, rep);
  {
    // Per-client participation for Figure-2-style analysis.
    std::ofstream out(out_dir / "participation.csv");
    if (!out) throw std::runtime_error("cannot write participation.csv");
    out << "# config=" << config_hash(cfg) << " seed=" << cfg.seed << "\n";
    out << "client,participation,similar_group\n";
    for (std::size_t u = 0; u < rep.participation_count.size(); ++u)
      out << u << "," << rep.participation_count[u] << "," << rep.similar_group_count[u]
          << "\n";
  }
  const json summary = summary_json(cfg, ds, rep);
  {
    std::ofstream sf(out_dir / "summary.json");
    sf << summary.dump(2) << "\n";
  }

  if (checkpoint && !sim.best_models().empty()) {
    const ItemMembership* m = sim.server().has_membership ? &sim.server().membership : nullptr;
    write_checkpoint(out_dir / "checkpoint", cfg, sim.best_round(), sim.best_models(),
                     sim.best_thetas(), sim.server().V_s, sim.server().V_g, m);
  }

  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const ExperimentConfig& base, const std::string& param,
              const std::vector<double>& values, const fs::path& out_dir, int workers) {
  if (param != "lambda" && param != "tau" && param != "item_clusters")
    throw std::invalid_argument("sweep: unknown parameter \"" + param +
                                "\" (expected lambda, tau or item_clusters)");
  if (values.empty()) throw std::invalid_argument("sweep: no values given");

  const auto ds = load_dataset(base);
  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "sweep.csv");
  if (!csv) throw std::runtime_error("cannot write sweep.csv");
  csv << "# config=" << config_hash(base) << " seed=" << base.seed << " param=" << param << "\n";
  csv << "value,best_round,validation_hr,validation_ndcg,test_hr,test_ndcg\n";

  for (std::size_t i = 0; i < values.size(); ++i) {
    ExperimentConfig c = base;
    if (param == "lambda") c.lambda = values[i];
    else if (param == "tau") c.tau = values[i];
    else c.item_clusters = static_cast<int>(values[i]);
    c.seed = mix_seed(base.seed, stream::kSweep, i);

    std::cerr << "sweep " << param << "=" << format_double(values[i]) << " (seed " << c.seed
              << ")\n";
    Simulation sim(ds, to_round_config(c, workers, /*track_best_state=*/false), c.seed);
    RunReport rep = sim.run(nullptr);
    csv << format_double(values[i]) << "," << rep.best_round << ","
        << format_double(rep.best_validation.hr) << ","
        << format_double(rep.best_validation.ndcg) << ","
        << format_double(rep.best_test.hr) << "," << format_double(rep.best_test.ndcg)
        << "\n";
    csv.flush();
  }
  std::cout << "sweep table: " << (out_dir / "sweep.csv").string() << "\n";
  return 0;
}

int cmd_prepare(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const auto ds = load_dataset(cfg);
  fs::create_directories(out_dir);
  const std::string header = "# config=" + config_hash(cfg) + " seed=" + std::to_string(cfg.seed);

  {
    std::ofstream out(out_dir / "splits.csv");
    if (!out) throw std::runtime_error("cannot write splits.csv");
    out << header << "\n";
    out << "user_index,item_index,split\n";
    for (int u = 0; u < ds.num_users; ++u) {
      for (int i : ds.train[static_cast<std::size_t>(u)]) out << u << "," << i << ",train\n";
      if (ds.validation[static_cast<std::size_t>(u)] >= 0)
        out << u << "," << ds.validation[static_cast<std::size_t>(u)] << ",validation\n";
      if (ds.test[static_cast<std::size_t>(u)] >= 0)
        out << u << "," << ds.test[static_cast<std::size_t>(u)] << ",test\n";
    }
  }
  export_id_maps_csv(ds, out_dir / "user_map.csv", out_dir / "item_map.csv");

  json s;
  s["num_users"] = ds.num_users;
  s["num_items"] = ds.num_items;
  s["train_interactions"] = ds.total_train();
  std::cout << s.dump(2) << "\n";
  return 0;
}

int cmd_diagnose(const fs::path& checkpoint_dir, int k, const fs::path& out_dir) {
  Checkpoint cp = read_checkpoint(checkpoint_dir);
  std::vector<const Mat*> models;
  models.reserve(cp.models.size());
  for (const auto& m : cp.models) models.push_back(&m);

  Rng rng = derive_rng(cp.seed, stream::kDiagnose, static_cast<std::uint64_t>(k));
  const std::vector<int> sizes = diagnose_client_kmeans(models, k, rng);

  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "histogram.csv");
    if (!out) throw std::runtime_error("cannot write histogram.csv");
    out << "# config=" << config_hash(cp.config) << " seed=" << cp.seed << " k=" << k << "\n";
    out << "cluster,size\n";
    for (std::size_t c = 0; c < sizes.size(); ++c) out << c << "," << sizes[c] << "\n";
  }
  {
    // Flattened client vectors for external projection tools.
    const Eigen::Index flat = cp.models.front().size();
    Mat rows(static_cast<Eigen::Index>(cp.models.size()), flat);
    for (std::size_t u = 0; u < cp.models.size(); ++u)
      rows.row(static_cast<Eigen::Index>(u)) =
          Eigen::Map<const Eigen::RowVectorXd>(cp.models[u].data(), flat);
    save_matrix(out_dir / "clients_flat.bin", rows);
  }

  json j;
  j["k"] = k;
  j["sizes"] = sizes;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_eval(const fs::path& checkpoint_dir, const std::optional<std::string>& data_override,
             const std::optional<std::string>& mode_override, const fs::path& out_file) {
  Checkpoint cp = read_checkpoint(checkpoint_dir);
  if (data_override) cp.config.dataset_path = *data_override;
  if (mode_override) cp.config.eval_mode = *mode_override;
  const auto ds = load_dataset(cp.config);
  if (static_cast<std::size_t>(ds.num_users) != cp.models.size())
    throw std::runtime_error("eval: dataset users != checkpoint clients");

  const EvalMode mode = parse_eval_mode(cp.config.eval_mode);
  Rng test_rng = derive_rng(cp.seed, stream::kEvalCandidates);
  const auto test_cands = build_eval_candidates(ds, mode, test_rng, EvalSplit::test);
  Rng val_rng = derive_rng(cp.seed, stream::kValCandidates);
  const auto val_cands = build_eval_candidates(ds, mode, val_rng, EvalSplit::validation);

  std::vector<ClientModelView> views(cp.models.size());
  for (std::size_t u = 0; u < cp.models.size(); ++u)
    views[u] = {&cp.models[u], &cp.thetas[u]};

  const auto val = evaluate_split(ds, views, val_cands, EvalSplit::validation, cp.config.eval_top_k);
  const auto test = evaluate_split(ds, views, test_cands, EvalSplit::test, cp.config.eval_top_k);

  json j;
  j["config_hash"] = config_hash(cp.config);
  j["seed"] = cp.seed;
  j["round"] = cp.round;
  j["mode"] = cp.config.eval_mode;
  j["k"] = cp.config.eval_top_k;
  j["validation_hr"] = val.hr;
  j["validation_ndcg"] = val.ndcg;
  j["test_hr"] = test.hr;
  j["test_ndcg"] = test.ndcg;
  std::cout << j.dump(2) << "\n";
  if (!out_file.empty()) {
    std::ofstream out(out_file);
    if (!out) throw std::runtime_error("cannot write " + out_file.string());
    out << j.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CoFedRec: co-clustering federated recommendation simulator"};
  app.require_subcommand(1);

  std::string config_path;
  ConfigOverrides overrides;
  std::string out_dir = "runs/out";
  int workers = 0;
  bool no_checkpoint = false;

  auto* run = app.add_subcommand("run", "run one federated training experiment");
  add_config_options(run, config_path, overrides);
  run->add_option("-o,--out", out_dir, "output directory");
  run->add_option("--workers", workers, "client-training threads (0 = hardware)");
  run->add_flag("--no-checkpoint", no_checkpoint, "skip the best-round checkpoint");

  std::string sweep_param;
  std::vector<double> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "re-run the experiment over a parameter grid");
  add_config_options(sweep, config_path, overrides);
  sweep->add_option("-o,--out", out_dir, "output directory");
  sweep->add_option("--workers", workers, "client-training threads (0 = hardware)");
  sweep->add_option("--param", sweep_param, "lambda|tau|item_clusters")->required();
  sweep->add_option("--values", sweep_values, "grid values")->required()->expected(-1);

  auto* prepare = app.add_subcommand("prepare", "preprocess a rating log and export the splits");
  add_config_options(prepare, config_path, overrides);
  prepare->add_option("-o,--out", out_dir, "output directory");

  std::string checkpoint_dir;
  int diagnose_k = 2;
  auto* diagnose = app.add_subcommand(
      "diagnose", "K-Means over flattened client models from a checkpoint");
  diagnose->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")->required();
  diagnose->add_option("-k,--clusters", diagnose_k, "number of client clusters");
  diagnose->add_option("-o,--out", out_dir, "output directory");

  std::optional<std::string> eval_data, eval_mode;
  std::string eval_out;
  auto* evalc = app.add_subcommand("eval", "re-evaluate a checkpoint");
  evalc->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")->required();
  evalc->add_option("--data", eval_data, "override the dataset path");
  evalc->add_option("--eval-mode", eval_mode, "override: sampled|full_rank");
  evalc->add_option("-o,--out", eval_out, "also write the metrics to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return cmd_run(resolve_config(config_path, overrides), out_dir, workers, !no_checkpoint);
    if (sweep->parsed()) return cmd_sweep(resolve_config(config_path, overrides), sweep_param, sweep_values, out_dir, workers);
    if (prepare->parsed()) return cmd_prepare(resolve_config(config_path, overrides), out_dir);
    if (diagnose->parsed()) return cmd_diagnose(checkpoint_dir, diagnose_k, out_dir);
    if (evalc->parsed()) return cmd_eval(checkpoint_dir, eval_data, eval_mode, eval_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
