#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spem/core.hpp"

namespace spem::blinks {

enum class Source { Detected, Artificial };

struct BlinkEvent {
  std::size_t onset = 0;   // first missing sample
  std::size_t offset = 0;  // one past the last
  Source source = Source::Detected;

  std::size_t duration() const noexcept { return offset - onset; }
  friend bool operator==(const BlinkEvent&, const BlinkEvent&) = default;
};

struct DetectionParams {
  double slope_thresh = 0.5;    // deg/sample
  std::size_t stable_run = 5;   // below-threshold samples that end an extension
  std::size_t merge_gap = 50;   // events separated by fewer samples are merged
  bool extend = true;
};

// Missing runs, widened over adjacent steep flanks and merged when close.
std::vector<BlinkEvent> detect_blinks(const GazeSequence& seq, const DetectionParams& p = {});

// Empirical (non-parametric) blink characteristics.
struct BlinkStats {
  std::vector<std::size_t> durations;
  std::vector<std::size_t> positions;
  std::vector<std::size_t> counts;

  bool empty() const noexcept { return counts.empty(); }
  void merge(const BlinkStats& other);
  friend bool operator==(const BlinkStats&, const BlinkStats&) = default;
};

BlinkStats blink_statistics(const Dataset& ds, const DetectionParams& p = {});

std::string to_json(const BlinkStats& s);
BlinkStats stats_from_json(const std::string& text);
BlinkStats read_stats(const std::filesystem::path& file);
void write_stats(const std::filesystem::path& file, const BlinkStats& s);

struct Injection {
  GazeSequence corrupted;
  MissingMask truth;
  std::vector<BlinkEvent> events;  // after clamping and coalescing
};

// Draws a blink count, then per blink a duration and a start position, all
// resampled with replacement from `stats`. Starts are clamped to >= 1 so the
// first sample is never removed; ends are capped at the sequence length.
Injection inject_blinks(const GazeSequence& seq, const BlinkStats& stats, std::uint64_t seed);

// Blinks with lengths/positions from `stats` are added until at least
// `target_fraction` of the samples are masked (or `max_blinks` is reached).
// Used to corrupt training sequences at a controlled rate.
MissingMask sample_mask_at_rate(std::size_t length, const BlinkStats& stats,
                                double target_fraction, std::uint64_t seed,
                                std::size_t max_blinks = 10000);

// Contiguous gap [begin_ms, end_ms) converted to samples; defaults match the
// 4 s large-gap study.
Injection large_gap_inject(const GazeSequence& seq, double begin_ms = 5000.0,
                           double end_ms = 9000.0);

// Sets the mask positions of `seq` to missing.
GazeSequence apply_mask(const GazeSequence& seq, const MissingMask& mask);

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

}  // namespace spem::blinks
