#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cofedrec/clustering.hpp"
#include "cofedrec/config.hpp"
#include "cofedrec/matrix.hpp"
#include "cofedrec/model.hpp"

namespace cofedrec {

// On-disk checkpoint: binary embedding dumps plus a JSON manifest.
//   manifest.json          config text, config hash, seed, round, shapes
//   client_embeddings.bin  one matrix record per client, ascending id
//   client_score.bin       one 1 x (d+1) record per client: weights, bias
//   V_s.bin / V_g.bin      server-side group / global models
//   membership.csv         item_index,label
struct Checkpoint {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  int round = -1;
  std::vector<Mat> models;
  std::vector<ScoreFunction> thetas;
  Mat V_s;
  Mat V_g;
  ItemMembership membership;
  bool has_membership = false;
};

void write_checkpoint(const std::filesystem::path& dir, const ExperimentConfig& config,
                      int round, const std::vector<Mat>& models,
                      const std::vector<ScoreFunction>& thetas, const Mat& V_s,
                      const Mat& V_g, const ItemMembership* membership);

Checkpoint read_checkpoint(const std::filesystem::path& dir);

}  // namespace cofedrec
