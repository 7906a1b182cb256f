#include <doctest.h>

#include <fstream>
#include <set>

#include "spem/harness.hpp"
#include "spem/plots.hpp"
#include "spem/resample.hpp"

using namespace spem;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny() {
  ExperimentConfig c;
  c.corpus.n_participants = 5;
  c.n_train_participants = 3;
  c.n_test_participants = 2;
  c.corpus.tasks = {1, 3};
  c.natural_blinks.mean_count = 0.5;
  c.methods = {"pchip", "SSA"};
  c.rae.filters = {2, 4};
  c.rae.max_epochs = 1;
  c.max_test_sequences = 3;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("names and suffixes") {
  CHECK(suffix(Scenario::Downsampled) == "-D");
  CHECK(suffix(Scenario::Upsampled) == "-U");
  CHECK(suffix(Scenario::Refined) == "-RAE");
  CHECK(parse_scenario("RAE") == Scenario::Refined);
  CHECK(parse_scenario("downsampled") == Scenario::Downsampled);
  CHECK_THROWS_AS(parse_scenario("X"), Error);
  CHECK(canonical_method("knn") == "KNN");
  CHECK_THROWS_AS(canonical_method("arima"), Error);
  CHECK(parse_gap_mode("large-gap") == GapMode::LargeGap);
}

TEST_CASE("pipeline stages") {
  std::vector<double> v(3000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.003 * static_cast<double>(i));
  const GazeSequence truth(v);
  PipelineConfig pc;
  const PchipImputer pchip;

  const auto d = run_pipeline(truth, pchip, nullptr, Scenario::Downsampled, pc);
  CHECK(d.coarse_imputed.size() == 100);
  CHECK(d.coarse_mask.empty());
  CHECK_FALSE(d.upsampled.has_value());

  const auto u = run_pipeline(truth, pchip, nullptr, Scenario::Upsampled, pc);
  REQUIRE(u.upsampled.has_value());
  CHECK(u.upsampled->size() == 3000);
  CHECK(u.upsampled->complete());
  CHECK(*u.upsampled == upsample(downsample(truth, 30), 3000, 30));

  CHECK_THROWS_AS(run_pipeline(truth, pchip, nullptr, Scenario::Refined, pc), Error);

  const auto rae = RaeModel::init(tiny().rae, 1);
  for (std::size_t i = 1000; i < 1200; ++i) v[i] = kMissing;
  const GazeSequence gappy(v);
  const auto r = run_pipeline(gappy, pchip, &rae, Scenario::Refined, pc);
  REQUIRE(r.refined.has_value());
  CHECK(r.refined->size() == 3000);
  CHECK(r.refined->complete());
  CHECK(run_pipeline(gappy, pchip, &rae, Scenario::Refined, pc).refined == r.refined);
}

TEST_CASE("imputer factory") {
  MethodModels mm;
  PipelineConfig pc;
  CHECK(make_imputer("pchip", mm, pc)->name() == "PCHIP");
  CHECK(make_imputer("ssa", mm, pc)->name() == "SSA");
  CHECK_THROWS_AS(make_imputer("knn", mm, pc), Error);
  CHECK_THROWS_AS(make_imputer("saits", mm, pc), Error);
}

TEST_CASE("data preparation") {
  const auto cfg = tiny();
  const auto d = prepare_data(cfg);
  CHECK(d.test.size() == 3);
  for (const auto& s : d.test) CHECK(s.complete());
  for (const auto& s : d.train_complete) CHECK(s.complete());
  CHECK_FALSE(d.stats.durations.empty());
  std::set<std::string> train_p, test_p;
  for (const auto& s : d.train) train_p.insert(s.meta().participant);
  for (const auto& s : d.test) test_p.insert(s.meta().participant);
  for (const auto& p : test_p) CHECK(train_p.count(p) == 0);
}

TEST_CASE("corruption always removes something") {
  const auto d = prepare_data(tiny());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = corrupt(d.test[0], d.stats, GapMode::Blinks, seed);
    CHECK_FALSE(r.truth.empty());
  }
  CHECK(corrupt(d.test[0], d.stats, GapMode::LargeGap, 0).truth.size() == 4000);
}

TEST_CASE("experiment table bookkeeping, determinism and artifacts") {
  auto cfg = tiny();
  const auto out = fs::temp_directory_path() / "spem_test_experiment";
  fs::remove_all(out);
  cfg.output_dir = out;
  cfg.plot_sequences = 1;
  const auto a = run_experiment(cfg);
  CHECK(a.ok());
  std::vector<std::string> names;
  for (const auto& r : a.table.rows) names.push_back(r.method);
  CHECK(names == std::vector<std::string>{"PCHIP-D", "SSA-D", "PCHIP-U", "SSA-U", "PCHIP-RAE", "SSA-RAE"});
  for (const auto& r : a.table.rows) {
    CHECK(r.n_sequences == 3);
    CHECK(r.n_failed == 0);
    CHECK(r.mean[0].has_value());
  }
  for (const char* f : {"table.csv", "reports.json", "config.json", "summary.json"}) CHECK(fs::exists(out / f));

  cfg.output_dir.clear();
  const auto b = run_experiment(cfg);
  CHECK(table_to_csv(a.table) == table_to_csv(b.table));

  const auto csv = table_to_csv(a.table);
  CHECK(csv.rfind("method,MAE,MRE,RMSE,Sim,FSD,RMSE_F,RMSE_F_Low,RMSE_F_High,n_sequences,n_failed\n", 0) == 0);

  const auto back = reports_from_json(reports_to_json(a.reports));
  REQUIRE(back.size() == a.reports.size());
  CHECK(table_to_csv(aggregate(back, names)) == csv);

  const auto plots = plots::emit_plots(out);
  CHECK(plots.size() >= 2);
  for (const auto& p : plots) CHECK(fs::file_size(p) > 100);
  CHECK_THROWS_AS(plots::emit_plots(out / "nope"), Error);
}

TEST_CASE("aggregation averages folds then sequences") {
  auto rep = [](const std::string& seq, int fold, double mae) {
    SequenceReport r;
    r.sequence = seq;
    r.method = "X-U";
    r.fold = fold;
    r.report.mae.value = mae;
    return r;
  };
  std::vector<SequenceReport> reps = {rep("a", 0, 1.0), rep("b", 0, 3.0), rep("a", 1, 5.0)};
  SequenceReport bad = rep("c", 1, 0.0);
  bad.error = "boom";
  reps.push_back(bad);
  const auto t = aggregate(reps, {"X-U"});
  CHECK(*t.row("X-U").mean[0] == doctest::Approx(3.5));
  CHECK(*t.row("X-U").spread[0] == doctest::Approx(1.5));
  CHECK_FALSE(t.row("X-U").mean[1].has_value());
  CHECK(t.row("X-U").n_failed == 1);
  CHECK(table_to_csv(t).find("NA") != std::string::npos);
  CHECK_THROWS_AS(t.row("Y-U"), Error);
}

TEST_CASE("experiment config JSON") {
  auto c = tiny();
  const auto back = experiment_config_from_json(to_json(c));
  CHECK(back.methods == c.methods);
  CHECK(back.corpus.n_participants == 5);
  CHECK(back.rae.filters == c.rae.filters);
  CHECK(to_json(back) == to_json(c));
  CHECK_THROWS_AS(experiment_config_from_json(R"({"methods": []})"), Error);
  CHECK_THROWS_AS(experiment_config_from_json(R"({"methods": ["gan"]})"), Error);
}

TEST_CASE("spectrogram shape") {
  std::vector<double> v(5000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.05 * static_cast<double>(i));
  const auto s = plots::spectrogram(GazeSequence(v));
  CHECK_FALSE(s.power_db.empty());
  const auto svg = plots::spectrogram_svg(s, "t");
  CHECK(svg.find("<svg") != std::string::npos);
}
