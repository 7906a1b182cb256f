#include <doctest.h>

#include <fstream>

#include "spem/checkpoint.hpp"

using namespace spem;
namespace fs = std::filesystem;

TEST_CASE("SAITS checkpoint round trip") {
  auto cfg = SaitsConfig::desk();
  cfg.seq_len = 20;
  cfg.d_model = 8;
  cfg.d_ff = 12;
  const auto m = SaitsModel::init(cfg, 3);
  const auto file = fs::temp_directory_path() / "spem_test_saits.json";
  save_checkpoint(file, m);
  CHECK(checkpoint_kind(file) == "saits");
  const auto back = load_saits(file);
  CHECK(back.config.seq_len == 20);
  CHECK(back.config.d_ff == 12);
  const auto a = m.parameters(), b = back.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
  CHECK_THROWS_AS(load_rae(file), Error);
}

TEST_CASE("RAE checkpoint round trip keeps running statistics") {
  auto cfg = RaeConfig::desk();
  cfg.filters = {3, 5};
  auto m = RaeModel::init(cfg, 4);
  const auto& cm = m;
  m.encoder[0].running_mean.value(1, 0) = 0.123456789012345;
  const auto file = fs::temp_directory_path() / "spem_test_rae.json";
  save_checkpoint(file, m);
  CHECK(checkpoint_kind(file) == "rae");
  const auto back = load_rae(file);
  CHECK(back.config.filters == cfg.filters);
  const auto a = cm.parameters(), b = back.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto file = fs::temp_directory_path() / "spem_test_bad.json";
  std::ofstream(file) << R"({"format":"something-else","version":1})";
  CHECK_THROWS_AS(load_saits(file), Error);
  std::ofstream(file) << "not json";
  CHECK_THROWS_AS(load_rae(file), Error);
}

TEST_CASE("config JSON validates") {
  auto c = SaitsConfig::desk();
  CHECK(saits_config_from_json(saits_config_to_json(c)).d_model == c.d_model);
  c.n_heads = 5;
  CHECK_THROWS_AS(saits_config_from_json(saits_config_to_json(c)), Error);
  auto r = RaeConfig::paper();
  CHECK(rae_config_from_json(rae_config_to_json(r)).filters == r.filters);
}
