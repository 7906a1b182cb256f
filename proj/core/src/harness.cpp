#include "spem/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "spem/checkpoint.hpp"
#include "spem/resample.hpp"

namespace spem {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---- names ----------------------------------------------------------------

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Downsampled: return "downsampled";
    case Scenario::Upsampled: return "upsampled";
    case Scenario::Refined: return "refined";
  }
  return "?";
}

std::string suffix(Scenario s) {
  switch (s) {
    case Scenario::Downsampled: return "-D";
    case Scenario::Upsampled: return "-U";
    case Scenario::Refined: return "-RAE";
  }
  return "?";
}

Scenario parse_scenario(const std::string& s) {
  if (s == "downsampled" || s == "D" || s == "-D") return Scenario::Downsampled;
  if (s == "upsampled" || s == "U" || s == "-U") return Scenario::Upsampled;
  if (s == "refined" || s == "RAE" || s == "-RAE") return Scenario::Refined;
  throw Error("unknown scenario '" + s + "' (expected downsampled, upsampled or refined)");
}

std::string to_string(GapMode g) { return g == GapMode::Blinks ? "blinks" : "large-gap"; }

GapMode parse_gap_mode(const std::string& s) {
  if (s == "blinks") return GapMode::Blinks;
  if (s == "large-gap" || s == "large_gap") return GapMode::LargeGap;
  throw Error("unknown gap mode '" + s + "' (expected blinks or large-gap)");
}

std::string canonical_method(const std::string& method) {
  std::string up;
  for (char c : method) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (up == "PCHIP" || up == "SSA" || up == "KNN" || up == "SAITS") return up;
  throw Error("unknown method '" + method + "' (expected pchip, ssa, knn or saits)");
}

// ---- pipeline -------------------------------------------------------------

std::unique_ptr<Imputer> make_imputer(const std::string& method, const MethodModels& models,
                                      const PipelineConfig& cfg) {
  const auto m = canonical_method(method);
  if (m == "PCHIP") return std::make_unique<PchipImputer>();
  if (m == "SSA") return std::make_unique<SsaImputer>(cfg.ssa);
  if (m == "KNN") {
    if (models.knn_library.empty()) throw Error("KNN needs a nonempty library");
    return std::make_unique<ZscoreImputer>(
        std::make_shared<KnnImputer>(models.knn_library, cfg.knn));
  }
  if (!models.saits) throw Error("SAITS needs a trained model");
  return std::make_unique<ZscoreImputer>(std::make_shared<SaitsImputer>(*models.saits));
}

namespace {

PipelineResult impute_stage(const GazeSequence& corrupted, const Imputer& imputer,
                            const PipelineConfig& cfg) {
  GazeSequence coarse = downsample(corrupted, cfg.factor);
  MissingMask cmask = MissingMask::of_missing(coarse);
  auto out = imputer.impute(coarse);
  return {std::move(coarse), std::move(cmask), std::move(out.sequence), std::nullopt, std::nullopt};
}

void finish_stage(PipelineResult& r, std::size_t fine_len, double fine_rate, const RaeModel* rae,
                  Scenario scenario, const MissingMask& fine_mask, const PipelineConfig& cfg) {
  if (scenario == Scenario::Downsampled) return;
  r.upsampled = upsample(r.coarse_imputed, fine_len, cfg.factor).with_rate(fine_rate);
  if (scenario == Scenario::Upsampled) return;
  if (!rae) throw Error("the refined scenario needs an RAE model");
  r.refined = refine(*rae, *r.upsampled, fine_mask, cfg.splice_gaps);
}

}  // namespace

PipelineResult run_pipeline(const GazeSequence& corrupted, const Imputer& imputer,
                            const RaeModel* rae, Scenario scenario, const PipelineConfig& cfg) {
  if (scenario == Scenario::Refined && !rae) throw Error("the refined scenario needs an RAE model");
  auto r = impute_stage(corrupted, imputer, cfg);
  finish_stage(r, corrupted.size(), corrupted.rate_hz(), rae, scenario,
               MissingMask::of_missing(corrupted), cfg);
  return r;
}

// ---- config ---------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (methods.empty()) throw Error("experiment: methods must be nonempty");
  for (const auto& m : methods) canonical_method(m);
  if (scenarios.empty()) throw Error("experiment: scenarios must be nonempty");
  if (folds < 1) throw Error("experiment: folds must be positive");
  if (pipeline.factor < 1) throw Error("experiment: factor must be positive");
  saits.validate();
  rae.validate();
  pipeline.knn.validate();
}

namespace {

template <class T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig experiment_config_from_json(const std::string& text) {
  ExperimentConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("experiment config: ") + e.what());
  }
  try {
    if (j.contains("corpus")) c.corpus = synth::corpus_spec_from_json(j.at("corpus").dump());
    if (j.contains("natural_blinks")) {
      const auto& b = j.at("natural_blinks");
      get(b, "mean_count", c.natural_blinks.mean_count);
      get(b, "duration_median_ms", c.natural_blinks.duration_median_ms);
      get(b, "duration_log_sigma", c.natural_blinks.duration_log_sigma);
      get(b, "max_duration_ms", c.natural_blinks.max_duration_ms);
      get(b, "artifact_ms", c.natural_blinks.artifact_ms);
      get(b, "artifact_deg", c.natural_blinks.artifact_deg);
    }
    if (j.contains("corpus_dir")) c.corpus_dir = j.at("corpus_dir").get<std::string>();
    if (j.contains("detection")) {
      const auto& d = j.at("detection");
      get(d, "slope_thresh", c.detection.slope_thresh);
      get(d, "stable_run", c.detection.stable_run);
      get(d, "merge_gap", c.detection.merge_gap);
      get(d, "extend", c.detection.extend);
    }
    get(j, "n_train_participants", c.n_train_participants);
    get(j, "n_test_participants", c.n_test_participants);
    get(j, "max_test_sequences", c.max_test_sequences);
    get(j, "max_train_sequences", c.max_train_sequences);
    get(j, "methods", c.methods);
    if (j.contains("scenarios")) {
      c.scenarios.clear();
      for (const auto& s : j.at("scenarios")) c.scenarios.push_back(parse_scenario(s.get<std::string>()));
    }
    if (j.contains("gap_mode")) c.gap_mode = parse_gap_mode(j.at("gap_mode").get<std::string>());
    get(j, "folds", c.folds);
    get(j, "seed", c.seed);
    if (j.contains("saits")) {
      auto merged = json::parse(saits_config_to_json(SaitsConfig::desk()));
      merged.update(j.at("saits"));
      c.saits = saits_config_from_json(merged.dump());
    }
    if (j.contains("rae")) {
      auto merged = json::parse(rae_config_to_json(RaeConfig::desk()));
      merged.update(j.at("rae"));
      c.rae = rae_config_from_json(merged.dump());
    }
    get(j, "factor", c.pipeline.factor);
    get(j, "splice_gaps", c.pipeline.splice_gaps);
    if (j.contains("ssa")) {
      const auto& s = j.at("ssa");
      get(s, "window_L", c.pipeline.ssa.window_L);
      get(s, "rank_r", c.pipeline.ssa.rank_r);
      get(s, "energy_threshold", c.pipeline.ssa.energy_threshold);
    }
    if (j.contains("knn")) {
      const auto& s = j.at("knn");
      get(s, "k", c.pipeline.knn.k);
      get(s, "context", c.pipeline.knn.context);
      if (s.contains("weighting"))
        c.pipeline.knn.weighting = s.at("weighting").get<std::string>() == "inverse-distance"
                                       ? KnnWeighting::InverseDistance
                                       : KnnWeighting::Uniform;
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    get(j, "plot_sequences", c.plot_sequences);
  } catch (const json::exception& e) {
    throw Error(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string to_json(const ExperimentConfig& c) {
  json j;
  j["corpus"] = json::parse(synth::to_json(c.corpus));
  j["natural_blinks"] = {{"mean_count", c.natural_blinks.mean_count},
                         {"duration_median_ms", c.natural_blinks.duration_median_ms},
                         {"duration_log_sigma", c.natural_blinks.duration_log_sigma},
                         {"max_duration_ms", c.natural_blinks.max_duration_ms},
                         {"artifact_ms", c.natural_blinks.artifact_ms},
                         {"artifact_deg", c.natural_blinks.artifact_deg}};
  if (c.corpus_dir) j["corpus_dir"] = c.corpus_dir->string();
  j["detection"] = {{"slope_thresh", c.detection.slope_thresh},
                    {"stable_run", c.detection.stable_run},
                    {"merge_gap", c.detection.merge_gap},
                    {"extend", c.detection.extend}};
  j["n_train_participants"] = c.n_train_participants;
  j["n_test_participants"] = c.n_test_participants;
  j["max_test_sequences"] = c.max_test_sequences;
  j["max_train_sequences"] = c.max_train_sequences;
  j["methods"] = c.methods;
  j["scenarios"] = json::array();
  for (auto s : c.scenarios) j["scenarios"].push_back(to_string(s));
  j["gap_mode"] = to_string(c.gap_mode);
  j["folds"] = c.folds;
  j["seed"] = c.seed;
  j["saits"] = json::parse(saits_config_to_json(c.saits));
  j["rae"] = json::parse(rae_config_to_json(c.rae));
  j["factor"] = c.pipeline.factor;
  j["splice_gaps"] = c.pipeline.splice_gaps;
  j["ssa"] = {{"window_L", c.pipeline.ssa.window_L},
              {"rank_r", c.pipeline.ssa.rank_r},
              {"energy_threshold", c.pipeline.ssa.energy_threshold}};
  j["knn"] = {{"k", c.pipeline.knn.k},
              {"context", c.pipeline.knn.context},
              {"weighting", c.pipeline.knn.weighting == KnnWeighting::Uniform ? "uniform"
                                                                             : "inverse-distance"}};
  j["output_dir"] = c.output_dir.string();
  j["plot_sequences"] = c.plot_sequences;
  return j.dump(2);
}

// ---- data -----------------------------------------------------------------

GazeSequence mask_detected_blinks(const GazeSequence& seq, const blinks::DetectionParams& p) {
  const auto events = blinks::detect_blinks(seq, p);
  if (events.empty()) return seq;
  std::vector<double> v(seq.samples().begin(), seq.samples().end());
  for (const auto& e : events)
    std::fill(v.begin() + static_cast<std::ptrdiff_t>(e.onset),
              v.begin() + static_cast<std::ptrdiff_t>(e.offset), kMissing);
  return seq.with_samples(std::move(v));
}

ExperimentData prepare_data(const ExperimentConfig& cfg) {
  Dataset recorded;
  if (cfg.corpus_dir) {
    const auto manifest = *cfg.corpus_dir / "manifest.json";
    recorded = fs::exists(manifest) ? load_manifest(manifest) : load_sequences(*cfg.corpus_dir);
  } else {
    recorded = synth::make_recorded_corpus(cfg.corpus, cfg.natural_blinks, cfg.seed).second;
  }
  if (recorded.empty()) throw Error("experiment: corpus is empty");

  ExperimentData d;
  d.stats = blinks::blink_statistics(recorded, cfg.detection);

  std::size_t n_train = cfg.n_train_participants, n_test = cfg.n_test_participants;
  if (n_train == 0 && n_test == 0) {
    const std::size_t p = recorded.participants().size();
    if (p < 2) throw Error("experiment: need at least two participants");
    n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(p))));
    n_train = p - n_test;
  }
  const Dataset split = split_by_participant(recorded, n_train, n_test, mix_seed(cfg.seed, 0x5917));
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto& s = split.sequences[i];
    if (split.split[i] == Split::Train) {
      if (cfg.max_train_sequences && d.train.size() >= cfg.max_train_sequences) continue;
      d.train.push_back(mask_detected_blinks(s, cfg.detection));
      if (s.complete()) d.train_complete.push_back(s);
    } else if (split.split[i] == Split::Test && s.complete()) {
      if (cfg.max_test_sequences && d.test.size() >= cfg.max_test_sequences) continue;
      d.test.push_back(s);
    }
  }
  if (d.test.empty()) throw Error("experiment: no complete test sequences");
  if (d.train.empty()) throw Error("experiment: no training sequences");
  return d;
}

namespace {

bool uses(const ExperimentConfig& cfg, const std::string& method) {
  return std::any_of(cfg.methods.begin(), cfg.methods.end(),
                     [&](const std::string& m) { return canonical_method(m) == method; });
}

bool has(const ExperimentConfig& cfg, Scenario s) {
  return std::find(cfg.scenarios.begin(), cfg.scenarios.end(), s) != cfg.scenarios.end();
}

std::vector<GazeSequence> coarse_zscored(const std::vector<GazeSequence>& seqs, std::size_t factor) {
  std::vector<GazeSequence> out;
  for (const auto& s : seqs) {
    auto c = downsample(s, factor);
    try {
      out.push_back(zscore(c).first);
    } catch (const Error&) {
      // all-missing or flat sequences carry nothing to learn from
    }
  }
  return out;
}

}  // namespace

FoldModels train_models(const ExperimentData& data, const ExperimentConfig& cfg) {
  cfg.validate();
  FoldModels out;
  const std::size_t fine_len = data.test.front().size();
  const std::size_t coarse_len = (fine_len + cfg.pipeline.factor - 1) / cfg.pipeline.factor;
  if (uses(cfg, "SAITS")) {
    SaitsConfig sc = cfg.saits;
    sc.seq_len = coarse_len;
    sc.factor = cfg.pipeline.factor;
    const auto coarse = coarse_zscored(data.train, cfg.pipeline.factor);
    for (int f = 0; f < cfg.folds; ++f) {
      auto r = train_saits(coarse, sc, data.stats, mix_seed(cfg.seed, 0x5a175000ULL + static_cast<std::uint64_t>(f)),
                           f, cfg.folds);
      out.saits.push_back(std::make_shared<const SaitsModel>(std::move(r.model)));
      r.model = SaitsModel{};
      out.saits_log.push_back(std::move(r));
    }
  }
  if (has(cfg, Scenario::Refined)) {
    RaeConfig rc = cfg.rae;
    rc.factor = cfg.pipeline.factor;
    for (int f = 0; f < cfg.folds; ++f) {
      auto r = train_rae(data.train_complete, rc, mix_seed(cfg.seed, 0xae000ULL + static_cast<std::uint64_t>(f)), f);
      out.rae.push_back(std::make_shared<const RaeModel>(std::move(r.model)));
      r.model = RaeModel{};
      out.rae_log.push_back(std::move(r));
    }
  }
  return out;
}

blinks::Injection corrupt(const GazeSequence& truth, const blinks::BlinkStats& stats, GapMode mode,
                          std::uint64_t seed) {
  if (mode == GapMode::LargeGap) return blinks::large_gap_inject(truth);
  // Every test sequence receives at least one blink: the count is drawn from
  // the sequences that had blinks.
  blinks::BlinkStats s = stats;
  s.counts.erase(std::remove(s.counts.begin(), s.counts.end(), std::size_t{0}), s.counts.end());
  if (s.counts.empty()) throw Error("corrupt: the blink statistics contain no blinks");
  return blinks::inject_blinks(truth, s, seed);
}

// ---- evaluation -----------------------------------------------------------

const ResultsRow& ResultsTable::row(const std::string& method) const {
  for (const auto& r : rows)
    if (r.method == method) return r;
  throw Error("results table has no row '" + method + "'");
}

ResultsTable aggregate(const std::vector<SequenceReport>& reports,
                       const std::vector<std::string>& row_order) {
  ResultsTable t;
  for (const auto& name : row_order) {
    ResultsRow row;
    row.method = name;
    std::map<int, std::array<std::pair<double, std::size_t>, 8>> per_fold;
    std::set<std::string> seen, failed;
    for (const auto& r : reports) {
      if (r.method != name) continue;
      auto& acc = per_fold[r.fold];
      if (!r.error.empty()) {
        failed.insert(r.sequence);
        continue;
      }
      seen.insert(r.sequence);
      for (std::size_t c = 0; c < 8; ++c) {
        const auto& v = r.report.at(c);
        if (v.defined()) {
          acc[c].first += *v.value;
          ++acc[c].second;
        }
      }
    }
    for (std::size_t c = 0; c < 8; ++c) {
      std::vector<double> means;
      for (const auto& [fold, acc] : per_fold)
        if (acc[c].second > 0) means.push_back(acc[c].first / static_cast<double>(acc[c].second));
      if (means.empty()) continue;
      double m = 0.0;
      for (double v : means) m += v;
      m /= static_cast<double>(means.size());
      double var = 0.0;
      for (double v : means) var += (v - m) * (v - m);
      row.mean[c] = m;
      row.spread[c] = std::sqrt(var / static_cast<double>(means.size()));
    }
    row.n_sequences = seen.size();
    row.n_failed = failed.size();
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
}

}  // namespace

std::string table_to_csv(const ResultsTable& t) {
  std::string out = "method";
  for (auto c : metrics::MetricsReport::kColumns) out += "," + std::string(c);
  out += ",n_sequences,n_failed\n";
  for (const auto& r : t.rows) {
    out += r.method;
    for (const auto& v : r.mean) out += "," + (v ? fmt(*v) : std::string("NA"));
    out += "," + std::to_string(r.n_sequences) + "," + std::to_string(r.n_failed) + "\n";
  }
  return out;
}

std::string reports_to_json(const std::vector<SequenceReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    json o;
    o["sequence"] = r.sequence;
    o["method"] = r.method;
    o["fold"] = r.fold;
    if (!r.error.empty()) o["error"] = r.error;
    o["report"] = json::parse(metrics::to_json(r.report, {r.sequence, r.method, "deg"}));
    arr.push_back(std::move(o));
  }
  return arr.dump(1) + "\n";
}

std::vector<SequenceReport> reports_from_json(const std::string& text) {
  std::vector<SequenceReport> out;
  const json arr = json::parse(text);
  for (const auto& o : arr) {
    SequenceReport r;
    r.sequence = o.at("sequence").get<std::string>();
    r.method = o.at("method").get<std::string>();
    r.fold = o.value("fold", 0);
    r.error = o.value("error", std::string());
    r.report = metrics::report_from_json(o.at("report").dump());
    out.push_back(std::move(r));
  }
  return out;
}

ExperimentResult evaluate_experiment(const ExperimentData& data, const FoldModels& models,
                                     const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& pc = cfg.pipeline;
  const bool want_u = has(cfg, Scenario::Upsampled), want_r = has(cfg, Scenario::Refined);
  const Scenario deepest = want_r ? Scenario::Refined : want_u ? Scenario::Upsampled : Scenario::Downsampled;
  if (uses(cfg, "SAITS") && static_cast<int>(models.saits.size()) != cfg.folds)
    throw Error("experiment: expected one SAITS model per fold");
  if (want_r && static_cast<int>(models.rae.size()) != cfg.folds)
    throw Error("experiment: expected one RAE model per fold");

  MethodModels base;
  if (uses(cfg, "KNN")) base.knn_library = coarse_zscored(data.train_complete, pc.factor);

  std::vector<std::string> methods;
  for (const auto& m : cfg.methods) methods.push_back(canonical_method(m));
  std::vector<std::string> row_order;
  for (auto s : cfg.scenarios)
    for (const auto& m : methods) row_order.push_back(m + suffix(s));

  // Fold-independent imputers are built once.
  std::map<std::string, std::unique_ptr<Imputer>> shared;
  for (const auto& m : methods)
    if (m != "SAITS") shared[m] = make_imputer(m, base, pc);
  std::vector<std::unique_ptr<Imputer>> saits_imputers;
  for (const auto& sm : models.saits) {
    MethodModels mm;
    mm.saits = sm;
    saits_imputers.push_back(make_imputer("SAITS", mm, pc));
  }

  ExperimentResult res;
  std::map<std::string, std::size_t> fail_count;
  const bool write = !cfg.output_dir.empty();

  for (std::size_t si = 0; si < data.test.size(); ++si) {
    const auto& truth = data.test[si];
    const auto id = truth.meta().id();
    const auto inj = corrupt(truth, data.stats, cfg.gap_mode, mix_seed(cfg.seed, hash_string(id)));
    const GazeSequence truth_coarse = downsample(truth, pc.factor);
    const bool keep = write && si < cfg.plot_sequences;
    const fs::path art = cfg.output_dir / "artifacts" / id;
    if (keep) {
      write_sequence(art / "original.csv", truth);
      write_sequence(art / "corrupted.csv", inj.corrupted);
      write_mask(art / "mask.txt", inj.truth);
    }

    for (const auto& m : methods) {
      bool failed_any = false;
      std::optional<PipelineResult> cached;
      for (int f = 0; f < cfg.folds; ++f) {
        const RaeModel* rae = want_r ? models.rae[static_cast<std::size_t>(f)].get() : nullptr;
        std::string err;
        PipelineResult r{truth_coarse, {}, truth_coarse, std::nullopt, std::nullopt};
        try {
          if (m == "SAITS") {
            r = impute_stage(inj.corrupted, *saits_imputers[static_cast<std::size_t>(f)], pc);
          } else {
            if (!cached) cached = impute_stage(inj.corrupted, *shared.at(m), pc);
            r = *cached;
          }
          finish_stage(r, truth.size(), truth.rate_hz(), rae, deepest, inj.truth, pc);
        } catch (const Error& e) {
          err = e.what();
          failed_any = true;
        }
        for (auto s : cfg.scenarios) {
          SequenceReport rep;
          rep.sequence = id;
          rep.method = m + suffix(s);
          rep.fold = f;
          rep.error = err;
          if (err.empty()) {
            if (s == Scenario::Downsampled)
              rep.report = metrics::evaluate(truth_coarse, r.coarse_imputed, r.coarse_mask);
            else if (s == Scenario::Upsampled)
              rep.report = metrics::evaluate(truth, *r.upsampled, inj.truth);
            else
              rep.report = metrics::evaluate(truth, *r.refined, inj.truth);
          }
          res.reports.push_back(std::move(rep));
        }
        if (keep && f == 0 && err.empty()) {
          write_sequence(art / (m + "-D.csv"), r.coarse_imputed);
          if (r.upsampled) write_sequence(art / (m + "-U.csv"), *r.upsampled);
          if (r.refined) write_sequence(art / (m + "-RAE.csv"), *r.refined);
        }
      }
      if (failed_any) ++fail_count[m];
    }
  }

  res.table = aggregate(res.reports, row_order);
  for (const auto& m : methods) {
    const std::size_t n = fail_count[m];
    if (10 * n > data.test.size())
      res.failures.push_back(m + " failed on " + std::to_string(n) + " of " +
                             std::to_string(data.test.size()) + " sequences");
  }

  if (write) {
    write_text(cfg.output_dir / "table.csv", table_to_csv(res.table));
    write_text(cfg.output_dir / "reports.json", reports_to_json(res.reports));
    write_text(cfg.output_dir / "config.json", to_json(cfg) + "\n");
    json summary;
    summary["aggregation"] = "simple mean over sequences, then mean over folds";
    summary["units"] = "deg";
    summary["gap_mode"] = to_string(cfg.gap_mode);
    summary["folds"] = cfg.folds;
    summary["n_test_sequences"] = data.test.size();
    summary["n_train_sequences"] = data.train.size();
    summary["failures"] = res.failures;
    json spread = json::object();
    for (const auto& r : res.table.rows) {
      json o = json::object();
      for (std::size_t c = 0; c < 8; ++c)
        o[std::string(metrics::MetricsReport::kColumns[c])] =
            r.spread[c] ? json(*r.spread[c]) : json(nullptr);
      spread[r.method] = o;
    }
    summary["fold_spread"] = spread;
    write_text(cfg.output_dir / "summary.json", summary.dump(2) + "\n");
  }
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto data = prepare_data(cfg);
  const auto models = train_models(data, cfg);
  if (!cfg.output_dir.empty()) {
    for (std::size_t f = 0; f < models.saits.size(); ++f)
      save_checkpoint(cfg.output_dir / "models" / ("saits_fold" + std::to_string(f) + ".json"), *models.saits[f]);
    for (std::size_t f = 0; f < models.rae.size(); ++f)
      save_checkpoint(cfg.output_dir / "models" / ("rae_fold" + std::to_string(f) + ".json"), *models.rae[f]);
  }
  return evaluate_experiment(data, models, cfg);
}

}  // namespace spem
