#include <doctest.h>

#include "cofedrec/config.hpp"

using namespace cofedrec;

TEST_SUITE("config") {

TEST_CASE("serialize -> parse -> serialize is byte-identical") {
  ExperimentConfig c;
  c.dataset_path = "data/ml-100k/ratings.csv";
  c.lambda = 0.005;
  c.tau = 0.1;
  c.participant_fraction = 0.37;
  c.seed = 123456789;
  const std::string once = serialize_config(c);
  const ExperimentConfig parsed = parse_config(once);
  CHECK(parsed == c);
  CHECK(serialize_config(parsed) == once);
}

TEST_CASE("parse accepts comments and blank lines") {
  const std::string text =
      "# experiment\n\nmodel.lr = 0.25\nprotocol.rounds = 7\nrun.seed = 9\n";
  const auto c = parse_config(text);
  CHECK(c.lr == doctest::Approx(0.25));
  CHECK(c.rounds == 7);
  CHECK(c.seed == 9);
}

TEST_CASE("unknown keys and bad numbers are config errors") {
  CHECK_THROWS_AS(parse_config("nonsense.key = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("model.lr = abc\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("model.lr 0.1\n"), std::invalid_argument);
}

TEST_CASE("hash tracks content") {
  ExperimentConfig a, b;
  CHECK(config_hash(a) == config_hash(b));
  b.lambda = 0.006;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("round-config mapping applies ablation switches") {
  ExperimentConfig c;
  c.ablation = "origin";
  c.lambda = 0.5;
  const auto rc = to_round_config(c, 2, false);
  CHECK(rc.distribute == DistributeMode::global);
  CHECK(rc.loss.lambda == 0.0);
  CHECK(rc.workers == 2);
  CHECK_FALSE(rc.track_best_state);

  c.ablation = "unknown";
  CHECK_THROWS_AS(to_round_config(c, 1, true), std::invalid_argument);
  c.ablation = "full";
  c.scl_variant = "bogus";
  CHECK_THROWS_AS(to_round_config(c, 1, true), std::invalid_argument);
}

TEST_CASE("format_double round-trips cleanly") {
  CHECK(format_double(0.005) == "0.005");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.1) == "0.1");
}

}  // TEST_SUITE
