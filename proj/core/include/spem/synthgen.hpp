#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spem/core.hpp"

namespace spem::synth {

enum class Profile { Sinusoid, Triangular };

struct StimulusSpec {
  int task = 1;             // SPT1..SPT12
  double amplitude = 5.0;   // deg
  double frequency = 0.2;   // target cycles per second
  double duration_s = 15.0;
  double rate_hz = 1000.0;
  double fixation_ms = 200.0;  // central fixation before motion onset
  Profile profile = Profile::Sinusoid;  // linear tasks only

  void validate() const;
};

// Built-in (amplitude, frequency) for a task. SPT1-4 / SPT5-8 cycle through
// {5, 10} deg x {0.2, 0.4} Hz; the lemniscates (SPT9-10, SPT11-12) use the
// 10 deg presets. These are placeholders, not measured stimulus values.
StimulusSpec preset(int task);

enum class TaskKind { Horizontal, Vertical, HorizontalLemniscate, VerticalLemniscate };
TaskKind task_kind(int task);
// Axes recorded for a task: x for horizontal, y for vertical, both for 2-D.
std::vector<Axis> task_axes(int task);

std::pair<GazeSequence, GazeSequence> target_trajectory(const StimulusSpec& spec);

struct PursuitModelSpec {
  double gain = 1.0;          // (0, 1]
  double latency_ms = 0.0;    // >= 0
  double noise_std = 0.0;     // deg, >= 0
  double catchup_rate = std::numeric_limits<double>::infinity();  // 1/s, >= 0

  void validate() const;
};

// First-order tracking of the gain-scaled, delayed target plus white noise.
GazeSequence simulate_pursuit(const GazeSequence& target, const PursuitModelSpec& model,
                              std::uint64_t seed);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Per-(participant, task) observer parameters are drawn uniformly from these.
struct ModelRanges {
  Range gain{0.85, 1.0};
  Range latency_ms{0.0, 40.0};
  Range noise_std{0.03, 0.08};
  Range catchup_rate{15.0, 40.0};
};

struct CorpusSpec {
  std::size_t n_participants = 10;
  std::vector<int> tasks = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  ModelRanges ranges;
  double duration_s = 15.0;
  double rate_hz = 1000.0;
  Profile profile = Profile::Sinusoid;
};

CorpusSpec corpus_spec_from_json(const std::string& text);
std::string to_json(const CorpusSpec& spec);

// One complete sequence per participant x task x recorded axis x eye.
Dataset make_corpus(const CorpusSpec& spec, std::uint64_t seed);
Dataset make_corpus(std::size_t n_participants, const std::vector<int>& tasks,
                    const ModelRanges& ranges, std::uint64_t seed);

// Generator of blink-like dropouts for building a "recorded" corpus: a
// Poisson number of blinks with log-normal durations at uniform positions,
// each flanked by a short steep excursion before the signal is lost.
struct NaturalBlinkSpec {
  double mean_count = 0.57;  // P(no blink) ~ 0.57, the complete fraction of the clinical corpus
  double duration_median_ms = 180.0;
  double duration_log_sigma = 0.7;
  double max_duration_ms = 2500.0;
  double artifact_ms = 8.0;
  double artifact_deg = 6.0;
};

GazeSequence add_natural_blinks(const GazeSequence& seq, const NaturalBlinkSpec& spec,
                                std::uint64_t seed);

// Same as make_corpus followed by add_natural_blinks on every sequence;
// returns (clean, recorded).
std::pair<Dataset, Dataset> make_recorded_corpus(const CorpusSpec& spec,
                                                 const NaturalBlinkSpec& blinks,
                                                 std::uint64_t seed);

}  // namespace spem::synth
