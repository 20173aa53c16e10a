#include "cofedrec/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace cofedrec {

namespace {

bool parse_int(std::string_view s, std::int64_t& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

bool parse_double(std::string_view s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

std::vector<std::string_view> split_by(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

RatingFormat sniff_format(std::string_view first_line) {
  if (first_line.find("::") != std::string_view::npos) return RatingFormat::dat;
  return RatingFormat::csv;
}

bool looks_like_header(std::string_view line) {
  for (char c : line) {
    if (std::isalpha(static_cast<unsigned char>(c))) return true;
  }
  return false;
}

}  // namespace

std::vector<RawRating> load_movielens(const std::filesystem::path& path,
                                      RatingFormat format, LoadStats* stats,
                                      std::size_t max_malformed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rating file " + path.string());

  LoadStats local;
  std::vector<RawRating> out;
  std::string line;
  std::size_t line_no = 0;
  bool format_fixed = format != RatingFormat::auto_detect;
  std::string first_error;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    ++local.total_lines;

    if (!format_fixed) {
      format = sniff_format(sv);
      format_fixed = true;
    }

    std::vector<std::string_view> fields;
    if (format == RatingFormat::dat) {
      fields = split_by(sv, "::");
    } else {
      fields = split_by(sv, sv.find('\t') != std::string_view::npos ? "\t" : ",");
    }

    // A generic CSV may carry a user,item,rating[,timestamp] header.
    if (local.total_lines == 1 && format == RatingFormat::csv && looks_like_header(sv)) {
      --local.total_lines;
      continue;
    }

    RawRating r;
    bool ok = fields.size() >= 3 && fields.size() <= 4;
    if (ok) ok = parse_int(trim(fields[0]), r.user_id) && r.user_id >= 0;
    if (ok) ok = parse_int(trim(fields[1]), r.item_id) && r.item_id >= 0;
    if (ok) ok = parse_double(trim(fields[2]), r.rating);
    if (ok && fields.size() == 4) {
      ok = parse_int(trim(fields[3]), r.timestamp);
    } else if (ok) {
      // No timestamp column: fall back to input order.
      r.timestamp = static_cast<std::int64_t>(line_no);
      ++local.missing_timestamps;
    }

    if (!ok) {
      ++local.malformed_lines;
      if (first_error.empty())
        first_error = "malformed rating at " + path.string() + ":" + std::to_string(line_no) +
                      ": \"" + std::string(sv.substr(0, 80)) + "\"";
      if (local.malformed_lines > max_malformed) {
        if (stats) *stats = local;
        throw std::runtime_error(first_error + " (" + std::to_string(local.malformed_lines) +
                                 " malformed line(s), limit " + std::to_string(max_malformed) + ")");
      }
      continue;
    }
    out.push_back(r);
  }

  if (stats) *stats = local;
  if (out.empty()) throw std::runtime_error("no rating records in " + path.string());
  return out;
}

bool InteractionDataset::in_train(int user, int item) const {
  const auto& t = train[static_cast<std::size_t>(user)];
  return std::binary_search(t.begin(), t.end(), item);
}

std::size_t InteractionDataset::total_train() const {
  std::size_t n = 0;
  for (const auto& t : train) n += t.size();
  return n;
}

InteractionDataset build_splits(const std::vector<RawRating>& ratings,
                                int min_interactions) {
  if (ratings.empty()) throw std::invalid_argument("build_splits: empty rating list");

  // Dedup per (user, item), keeping the latest timestamp (ties: last record wins).
  std::map<std::int64_t, std::map<std::int64_t, std::int64_t>> per_user;  // user -> item -> ts
  for (const auto& r : ratings) {
    auto& items = per_user[r.user_id];
    auto it = items.find(r.item_id);
    if (it == items.end() || r.timestamp >= it->second) items[r.item_id] = r.timestamp;
  }

  InteractionDataset ds;

  // Filter and split. Raw-id maps are built over retained users/items only,
  // in ascending raw-id order.
  struct UserSplit {
    std::int64_t raw_user;
    std::vector<std::int64_t> train_items;
    std::int64_t val_item = -1;
    std::int64_t test_item = -1;
  };
  std::vector<UserSplit> splits;

  for (const auto& [raw_user, items] : per_user) {
    if (static_cast<int>(items.size()) < min_interactions) continue;

    // Sort by (timestamp, raw item id) ascending.
    std::vector<std::pair<std::int64_t, std::int64_t>> ordered;  // (ts, item)
    ordered.reserve(items.size());
    for (const auto& [item, ts] : items) ordered.emplace_back(ts, item);
    std::sort(ordered.begin(), ordered.end());

    UserSplit s;
    s.raw_user = raw_user;
    if (ordered.size() >= 3) {
      s.test_item = ordered.back().second;
      s.val_item = ordered[ordered.size() - 2].second;
      for (std::size_t i = 0; i + 2 < ordered.size(); ++i)
        s.train_items.push_back(ordered[i].second);
    } else {
      ds.warnings.push_back("user " + std::to_string(raw_user) +
                            " dropped: no training positive after leave-latest-out split");
      continue;
    }
    splits.push_back(std::move(s));
  }

  if (splits.empty()) throw std::runtime_error("build_splits: no users retained");

  // Dense item ids over everything the retained users touch.
  std::map<std::int64_t, int> item_map;
  for (const auto& s : splits) {
    for (auto i : s.train_items) item_map.emplace(i, 0);
    item_map.emplace(s.val_item, 0);
    item_map.emplace(s.test_item, 0);
  }
  int next_item = 0;
  for (auto& [raw, dense] : item_map) dense = next_item++;

  ds.num_users = static_cast<int>(splits.size());
  ds.num_items = next_item;
  ds.train.resize(splits.size());
  ds.validation.resize(splits.size());
  ds.test.resize(splits.size());
  ds.user_ids.reserve(splits.size());
  ds.item_ids.resize(item_map.size());
  for (const auto& [raw, dense] : item_map) {
    ds.item_ids[static_cast<std::size_t>(dense)] = raw;
    ds.item_index.emplace(raw, dense);
  }

  for (std::size_t u = 0; u < splits.size(); ++u) {
    const auto& s = splits[u];
    ds.user_ids.push_back(s.raw_user);
    ds.user_index.emplace(s.raw_user, static_cast<int>(u));
    auto& t = ds.train[u];
    t.reserve(s.train_items.size());
    for (auto i : s.train_items) t.push_back(item_map.at(i));
    std::sort(t.begin(), t.end());
    ds.validation[u] = item_map.at(s.val_item);
    ds.test[u] = item_map.at(s.test_item);
  }
  return ds;
}

namespace {

// Ascending item indices outside `excluded` (which must be sorted unique).
std::vector<int> complement_pool(int num_items, const std::vector<int>& excluded) {
  std::vector<int> pool;
  pool.reserve(static_cast<std::size_t>(num_items) - excluded.size());
  std::size_t j = 0;
  for (int i = 0; i < num_items; ++i) {
    if (j < excluded.size() && excluded[j] == i) {
      ++j;
    } else {
      pool.push_back(i);
    }
  }
  return pool;
}

std::vector<int> merge_sorted_unique(std::vector<int> a, const std::vector<int>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

}  // namespace

NegativeSample sample_train_negatives(const InteractionDataset& ds, int user,
                                      int num_per_positive, Rng& rng,
                                      const std::vector<int>& extra_excluded) {
  const auto& positives = ds.train[static_cast<std::size_t>(user)];
  const std::size_t want = positives.size() * static_cast<std::size_t>(num_per_positive);

  std::vector<int> excluded = merge_sorted_unique(positives, extra_excluded);
  std::vector<int> pool = complement_pool(ds.num_items, excluded);

  NegativeSample out;
  if (pool.empty()) {
    if (want > 0) throw std::runtime_error("negative pool empty for user " + std::to_string(user));
    return out;
  }
  if (want <= pool.size()) {
    rng.partial_shuffle(pool, want);
    out.items.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(want));
  } else {
    out.with_replacement = true;
    out.items.reserve(want);
    for (std::size_t i = 0; i < want; ++i)
      out.items.push_back(pool[rng.uniform_index(pool.size())]);
  }
  return out;
}

EvalCandidates build_eval_candidates(const InteractionDataset& ds, EvalMode mode,
                                     Rng& rng, EvalSplit split) {
  EvalCandidates out;
  out.mode = mode;
  out.lists.resize(static_cast<std::size_t>(ds.num_users));
  out.shortfall.assign(static_cast<std::size_t>(ds.num_users), 0);
  if (mode == EvalMode::full_rank) return out;

  constexpr int kNumNegatives = 99;
  for (int u = 0; u < ds.num_users; ++u) {
    const std::size_t su = static_cast<std::size_t>(u);
    const int positive = split == EvalSplit::test ? ds.test[su] : ds.validation[su];
    if (positive < 0) continue;

    std::vector<int> excluded = ds.train[su];
    if (ds.validation[su] >= 0) excluded.push_back(ds.validation[su]);
    if (ds.test[su] >= 0) excluded.push_back(ds.test[su]);
    std::sort(excluded.begin(), excluded.end());
    excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());

    std::vector<int> pool = complement_pool(ds.num_items, excluded);
    const std::size_t take = std::min<std::size_t>(kNumNegatives, pool.size());
    rng.partial_shuffle(pool, take);

    auto& list = out.lists[su];
    list.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    list.push_back(positive);
    out.shortfall[su] = kNumNegatives - static_cast<int>(take);
  }
  return out;
}

std::vector<std::vector<VirtualRating>> inject_virtual_ratings(
    const InteractionDataset& ds, double ratio, Rng& rng) {
  if (ratio < 0.0 || ratio > 0.5)
    throw std::invalid_argument("virtual-rating ratio must be in [0, 0.5]");

  std::vector<std::vector<VirtualRating>> out(static_cast<std::size_t>(ds.num_users));
  if (ratio == 0.0) return out;

  for (int u = 0; u < ds.num_users; ++u) {
    const std::size_t su = static_cast<std::size_t>(u);
    const std::size_t count = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(ds.train[su].size())));
    if (count == 0) continue;

    std::vector<int> interacted = ds.train[su];
    if (ds.validation[su] >= 0) interacted.push_back(ds.validation[su]);
    if (ds.test[su] >= 0) interacted.push_back(ds.test[su]);
    std::sort(interacted.begin(), interacted.end());
    std::vector<int> pool = complement_pool(ds.num_items, interacted);

    const std::size_t take = std::min(count, pool.size());
    rng.partial_shuffle(pool, take);
    auto& tuples = out[su];
    tuples.reserve(take);
    for (std::size_t i = 0; i < take; ++i)
      tuples.push_back({pool[i], rng.bernoulli(0.5) ? 1 : 0});
  }
  return out;
}

void export_id_maps_csv(const InteractionDataset& ds,
                        const std::filesystem::path& user_csv,
                        const std::filesystem::path& item_csv) {
  std::ofstream uf(user_csv);
  if (!uf) throw std::runtime_error("cannot open " + user_csv.string());
  uf << "raw_user_id,dense_index\n";
  for (std::size_t u = 0; u < ds.user_ids.size(); ++u)
    uf << ds.user_ids[u] << "," << u << "\n";

  std::ofstream itf(item_csv);
  if (!itf) throw std::runtime_error("cannot open " + item_csv.string());
  itf << "raw_item_id,dense_index\n";
  for (std::size_t i = 0; i < ds.item_ids.size(); ++i)
    itf << ds.item_ids[i] << "," << i << "\n";
}

}  // namespace cofedrec
