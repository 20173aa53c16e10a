#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cofedrec/dataset.hpp"
#include "cofedrec/federation.hpp"

namespace cofedrec {

// Flat experiment description. Serializes to a canonical plain-text
// key = value form: parse(serialize(c)) == c and the serialization is the
// fixed point, so saved configs round-trip byte-identically. Execution
// details (output directory, worker count) deliberately live outside so
// they cannot perturb the config hash or the run's random streams.
struct ExperimentConfig {
  std::string dataset_path;
  std::string dataset_format = "auto";  // auto | dat | csv
  int min_interactions = 5;

  int dim = 32;
  double lr = 0.1;
  int batch_size = 256;
  int local_epochs = 1;

  int rounds = 100;
  double participant_fraction = 1.0;
  int item_clusters = 30;
  double lambda = 0.005;
  double tau = 0.1;
  std::string scl_variant = "supcontrast";  // supcontrast | item_s | none
  std::string ablation = "full";            // full | origin | user_p | item_s | item_sc
  double virtual_ratio = 0.0;
  int num_negatives = 4;
  int scl_max_items = 4096;

  int eval_top_k = 10;
  std::string eval_mode = "sampled";  // sampled | full_rank
  int eval_cadence = 1;

  std::uint64_t seed = 42;

  bool operator==(const ExperimentConfig&) const = default;
};

std::string serialize_config(const ExperimentConfig& c);
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::filesystem::path& path);

// FNV-1a over the canonical serialization, as a 16-hex-digit string.
std::string config_hash(const ExperimentConfig& c);

// Shortest round-trip decimal form of a double (to_chars).
std::string format_double(double v);

RatingFormat parse_rating_format(const std::string& name);
SclVariant parse_scl_variant(const std::string& name);
EvalMode parse_eval_mode(const std::string& name);

// Expands the flat config into the simulator's round configuration
// (applying the ablation switches last).
RoundConfig to_round_config(const ExperimentConfig& c, int workers = 1,
                            bool track_best_state = true);

}  // namespace cofedrec
