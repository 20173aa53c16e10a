#include "cofedrec/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace cofedrec {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

namespace {

std::string format_int(std::int64_t v) { return std::to_string(v); }

double parse_double_or_throw(const std::string& key, const std::string& value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw std::invalid_argument("config: bad number for " + key + ": \"" + value + "\"");
  return out;
}

std::int64_t parse_int_or_throw(const std::string& key, const std::string& value) {
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw std::invalid_argument("config: bad integer for " + key + ": \"" + value + "\"");
  return out;
}

std::uint64_t parse_u64_or_throw(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw std::invalid_argument("config: bad integer for " + key + ": \"" + value + "\"");
  return out;
}

std::string trim_copy(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t\r");
  std::size_t end = s.find_last_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  return s.substr(begin, end - begin + 1);
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "dataset.path = " << c.dataset_path << "\n";
  out << "dataset.format = " << c.dataset_format << "\n";
  out << "dataset.min_interactions = " << format_int(c.min_interactions) << "\n";
  out << "model.dim = " << format_int(c.dim) << "\n";
  out << "model.lr = " << format_double(c.lr) << "\n";
  out << "model.batch_size = " << format_int(c.batch_size) << "\n";
  out << "model.local_epochs = " << format_int(c.local_epochs) << "\n";
  out << "protocol.rounds = " << format_int(c.rounds) << "\n";
  out << "protocol.participant_fraction = " << format_double(c.participant_fraction) << "\n";
  out << "protocol.item_clusters = " << format_int(c.item_clusters) << "\n";
  out << "protocol.lambda = " << format_double(c.lambda) << "\n";
  out << "protocol.tau = " << format_double(c.tau) << "\n";
  out << "protocol.scl_variant = " << c.scl_variant << "\n";
  out << "protocol.ablation = " << c.ablation << "\n";
  out << "protocol.virtual_ratio = " << format_double(c.virtual_ratio) << "\n";
  out << "protocol.num_negatives = " << format_int(c.num_negatives) << "\n";
  out << "protocol.scl_max_items = " << format_int(c.scl_max_items) << "\n";
  out << "eval.top_k = " << format_int(c.eval_top_k) << "\n";
  out << "eval.mode = " << c.eval_mode << "\n";
  out << "eval.cadence = " << format_int(c.eval_cadence) << "\n";
  out << "run.seed = " << std::to_string(c.seed) << "\n";
  return out.str();
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim_copy(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: missing '=' on line " + std::to_string(line_no));
    const std::string key = trim_copy(stripped.substr(0, eq));
    const std::string value = trim_copy(stripped.substr(eq + 1));

    if (key == "dataset.path") c.dataset_path = value;
    else if (key == "dataset.format") c.dataset_format = value;
    else if (key == "dataset.min_interactions") c.min_interactions = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "model.dim") c.dim = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "model.lr") c.lr = parse_double_or_throw(key, value);
    else if (key == "model.batch_size") c.batch_size = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "model.local_epochs") c.local_epochs = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "protocol.rounds") c.rounds = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "protocol.participant_fraction") c.participant_fraction = parse_double_or_throw(key, value);
    else if (key == "protocol.item_clusters") c.item_clusters = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "protocol.lambda") c.lambda = parse_double_or_throw(key, value);
    else if (key == "protocol.tau") c.tau = parse_double_or_throw(key, value);
    else if (key == "protocol.scl_variant") c.scl_variant = value;
    else if (key == "protocol.ablation") c.ablation = value;
    else if (key == "protocol.virtual_ratio") c.virtual_ratio = parse_double_or_throw(key, value);
    else if (key == "protocol.num_negatives") c.num_negatives = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "protocol.scl_max_items") c.scl_max_items = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "eval.top_k") c.eval_top_k = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "eval.mode") c.eval_mode = value;
    else if (key == "eval.cadence") c.eval_cadence = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "run.seed") c.seed = parse_u64_or_throw(key, value);
    else throw std::invalid_argument("config: unknown key \"" + key + "\" on line " +
                                     std::to_string(line_no));
  }
  return c;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string bytes = serialize_config(c);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

RatingFormat parse_rating_format(const std::string& name) {
  if (name == "auto") return RatingFormat::auto_detect;
  if (name == "dat") return RatingFormat::dat;
  if (name == "csv") return RatingFormat::csv;
  throw std::invalid_argument("unknown dataset format: " + name);
}

SclVariant parse_scl_variant(const std::string& name) {
  if (name == "supcontrast") return SclVariant::supcontrast;
  if (name == "item_s") return SclVariant::item_s;
  if (name == "none") return SclVariant::none;
  throw std::invalid_argument("unknown scl variant: " + name);
}

EvalMode parse_eval_mode(const std::string& name) {
  if (name == "sampled") return EvalMode::sampled;
  if (name == "full_rank") return EvalMode::full_rank;
  throw std::invalid_argument("unknown eval mode: " + name);
}

RoundConfig to_round_config(const ExperimentConfig& c, int workers,
                            bool track_best_state) {
  RoundConfig rc;
  rc.total_rounds = c.rounds;
  rc.participant_fraction = c.participant_fraction;
  rc.item_clusters = c.item_clusters;
  rc.embedding_dim = c.dim;
  rc.loss.lambda = c.lambda;
  rc.loss.tau = c.tau;
  rc.loss.variant = parse_scl_variant(c.scl_variant);
  rc.loss.learning_rate = c.lr;
  rc.loss.local_epochs = c.local_epochs;
  rc.loss.batch_size = c.batch_size;
  rc.loss.scl_max_items = c.scl_max_items;
  rc.num_negatives = c.num_negatives;
  rc.virtual_ratio = c.virtual_ratio;
  rc.eval_cadence = c.eval_cadence;
  rc.eval_top_k = c.eval_top_k;
  rc.eval_mode = parse_eval_mode(c.eval_mode);
  rc.workers = workers;
  rc.track_best_state = track_best_state;
  return ablation_mode(rc, parse_ablation(c.ablation));
}

}  // namespace cofedrec
