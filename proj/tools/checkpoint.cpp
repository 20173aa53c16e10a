#include "checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cofedrec {

using nlohmann::json;

void write_checkpoint(const std::filesystem::path& dir, const ExperimentConfig& config,
                      int round, const std::vector<Mat>& models,
                      const std::vector<ScoreFunction>& thetas, const Mat& V_s,
                      const Mat& V_g, const ItemMembership* membership) {
  if (models.empty() || models.size() != thetas.size())
    throw std::invalid_argument("write_checkpoint: inconsistent model/theta lists");
  std::filesystem::create_directories(dir);

  json manifest;
  manifest["config"] = serialize_config(config);
  manifest["config_hash"] = config_hash(config);
  manifest["seed"] = config.seed;
  manifest["round"] = round;
  manifest["num_clients"] = models.size();
  manifest["num_items"] = models.front().rows();
  manifest["dim"] = models.front().cols();
  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest.json");
    out << manifest.dump(2) << "\n";
  }

  {
    std::ofstream out(dir / "client_embeddings.bin", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write client_embeddings.bin");
    for (const auto& m : models) write_matrix(out, m);
  }
  {
    std::ofstream out(dir / "client_score.bin", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write client_score.bin");
    for (const auto& t : thetas) {
      Mat row(1, t.weights.size() + 1);
      row.block(0, 0, 1, t.weights.size()) = t.weights.transpose();
      row(0, t.weights.size()) = t.bias;
      write_matrix(out, row);
    }
  }
  save_matrix(dir / "V_s.bin", V_s);
  save_matrix(dir / "V_g.bin", V_g);

  if (membership) {
    std::ofstream out(dir / "membership.csv");
    if (!out) throw std::runtime_error("cannot write membership.csv");
    out << "item_index,label\n";
    for (std::size_t i = 0; i < membership->labels.size(); ++i)
      out << i << "," << membership->labels[i] << "\n";
  }
}

Checkpoint read_checkpoint(const std::filesystem::path& dir) {
  Checkpoint cp;

  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw std::runtime_error("cannot open " + (dir / "manifest.json").string());
  json manifest = json::parse(mf);
  cp.config = parse_config(manifest.at("config").get<std::string>());
  cp.seed = manifest.at("seed").get<std::uint64_t>();
  cp.round = manifest.at("round").get<int>();

  cp.models = load_matrix_stream(dir / "client_embeddings.bin");
  const auto score_rows = load_matrix_stream(dir / "client_score.bin");
  if (score_rows.size() != cp.models.size())
    throw std::runtime_error("checkpoint: model/score record count mismatch");
  cp.thetas.resize(score_rows.size());
  for (std::size_t u = 0; u < score_rows.size(); ++u) {
    const Mat& row = score_rows[u];
    const Eigen::Index d = row.cols() - 1;
    cp.thetas[u].weights = row.block(0, 0, 1, d).transpose();
    cp.thetas[u].bias = row(0, d);
  }
  cp.V_s = load_matrix(dir / "V_s.bin");
  cp.V_g = load_matrix(dir / "V_g.bin");

  const auto mpath = dir / "membership.csv";
  if (std::filesystem::exists(mpath)) {
    std::ifstream in(mpath);
    std::string line;
    std::getline(in, line);  // header
    int max_label = -1;
    while (std::getline(in, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      const int label = std::stoi(line.substr(comma + 1));
      cp.membership.labels.push_back(label);
      max_label = std::max(max_label, label);
    }
    cp.membership.num_clusters = max_label + 1;
    cp.has_membership = !cp.membership.labels.empty();
  }
  return cp;
}

}  // namespace cofedrec
