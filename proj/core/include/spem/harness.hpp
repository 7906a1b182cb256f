#pragma once

// Experiment orchestration: corpus preparation, model training, the
// decimate -> impute -> upsample -> refine pipeline and the -D / -U / -RAE
// evaluation scenarios.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spem/blinks.hpp"
#include "spem/core.hpp"
#include "spem/imputers.hpp"
#include "spem/metrics.hpp"
#include "spem/rae.hpp"
#include "spem/saits.hpp"
#include "spem/synthgen.hpp"

namespace spem {

enum class Scenario { Downsampled, Upsampled, Refined };

std::string to_string(Scenario s);   // "downsampled", ...
std::string suffix(Scenario s);      // "-D", "-U", "-RAE"
Scenario parse_scenario(const std::string& s);  // long names or D/U/RAE

enum class GapMode { Blinks, LargeGap };

std::string to_string(GapMode g);
GapMode parse_gap_mode(const std::string& s);

struct PipelineConfig {
  std::size_t factor = 30;
  SsaConfig ssa;
  KnnConfig knn;
  bool splice_gaps = false;  // refine only inside the mask
};

// Everything a method may need besides the corrupted sequence.
struct MethodModels {
  std::shared_ptr<const SaitsModel> saits;
  std::shared_ptr<const RaeModel> rae;
  std::vector<GazeSequence> knn_library;  // coarse, z-scored, complete
};

// Canonical method names: PCHIP, SSA, KNN, SAITS (input is case-insensitive).
std::string canonical_method(const std::string& method);

// Coarse-grid imputer for a method. KNN and SAITS run on z-scored input.
std::unique_ptr<Imputer> make_imputer(const std::string& method, const MethodModels& models,
                                      const PipelineConfig& cfg);

struct PipelineResult {
  GazeSequence coarse;          // decimated corrupted input
  MissingMask coarse_mask;      // blocks that became missing
  GazeSequence coarse_imputed;
  std::optional<GazeSequence> upsampled;
  std::optional<GazeSequence> refined;
};

// Runs the pipeline as far as `scenario` requires. The imputer only ever
// sees the corrupted sequence.
PipelineResult run_pipeline(const GazeSequence& corrupted, const Imputer& imputer,
                            const RaeModel* rae, Scenario scenario, const PipelineConfig& cfg);

struct ExperimentConfig {
  synth::CorpusSpec corpus;
  synth::NaturalBlinkSpec natural_blinks;
  std::optional<std::filesystem::path> corpus_dir;  // recorded corpus on disk instead
  blinks::DetectionParams detection;
  std::size_t n_train_participants = 0;  // 0 with n_test 0: an 80/20 split
  std::size_t n_test_participants = 0;
  std::size_t max_test_sequences = 0;    // 0: all complete test sequences
  std::size_t max_train_sequences = 0;   // 0: all
  std::vector<std::string> methods = {"PCHIP", "SSA", "KNN", "SAITS"};
  std::vector<Scenario> scenarios = {Scenario::Downsampled, Scenario::Upsampled,
                                     Scenario::Refined};
  GapMode gap_mode = GapMode::Blinks;
  int folds = 1;
  std::uint64_t seed = 1;
  SaitsConfig saits = SaitsConfig::desk();
  RaeConfig rae = RaeConfig::desk();
  PipelineConfig pipeline;
  std::filesystem::path output_dir;  // empty: nothing written
  std::size_t plot_sequences = 0;    // artifacts kept for plotting

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const std::string& text);
std::string to_json(const ExperimentConfig& cfg);

// Corpus after preprocessing and splitting.
struct ExperimentData {
  blinks::BlinkStats stats;            // from every recorded sequence
  std::vector<GazeSequence> train;     // detected blinks set to missing
  std::vector<GazeSequence> train_complete;
  std::vector<GazeSequence> test;      // complete ground truth
};

ExperimentData prepare_data(const ExperimentConfig& cfg);

// Detected blink events (with slope extension) replaced by missing samples.
GazeSequence mask_detected_blinks(const GazeSequence& seq, const blinks::DetectionParams& p);

struct FoldModels {
  std::vector<std::shared_ptr<const SaitsModel>> saits;  // one per fold
  std::vector<std::shared_ptr<const RaeModel>> rae;
  std::vector<SaitsTrainResult> saits_log;  // model fields moved out
  std::vector<RaeTrainResult> rae_log;
};

// Trains what the configured methods and scenarios need.
FoldModels train_models(const ExperimentData& data, const ExperimentConfig& cfg);

// The injected corruption of one test sequence.
blinks::Injection corrupt(const GazeSequence& truth, const blinks::BlinkStats& stats, GapMode mode,
                          std::uint64_t seed);

struct SequenceReport {
  std::string sequence;
  std::string method;  // with scenario suffix
  int fold = 0;
  metrics::MetricsReport report;
  std::string error;   // pipeline failure, empty on success
};

struct ResultsRow {
  std::string method;  // e.g. "SAITS-U"
  std::array<std::optional<double>, 8> mean;    // kColumns order
  std::array<std::optional<double>, 8> spread;  // std over folds
  std::size_t n_sequences = 0;
  std::size_t n_failed = 0;
};

struct ResultsTable {
  std::vector<ResultsRow> rows;
  const ResultsRow& row(const std::string& method) const;
};

struct ExperimentResult {
  ResultsTable table;
  std::vector<SequenceReport> reports;
  std::vector<std::string> failures;  // methods over the failure threshold
  bool ok() const noexcept { return failures.empty(); }
};

// Scores every test sequence under every method and scenario with the given
// models. Writes artifacts when cfg.output_dir is set.
ExperimentResult evaluate_experiment(const ExperimentData& data, const FoldModels& models,
                                     const ExperimentConfig& cfg);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Fold means of per-sequence reports, then mean (and spread) over folds.
ResultsTable aggregate(const std::vector<SequenceReport>& reports,
                       const std::vector<std::string>& row_order);

std::string table_to_csv(const ResultsTable& t);
std::string reports_to_json(const std::vector<SequenceReport>& reports);
std::vector<SequenceReport> reports_from_json(const std::string& text);

}  // namespace spem
