#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spem {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::filesystem::path file, std::size_t line, const std::string& what);

  const std::filesystem::path& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::filesystem::path file_;
  std::size_t line_;
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) noexcept { return std::isnan(v); }

enum class Axis { X, Y };
enum class Eye { Left, Right };

std::string to_string(Axis a);
std::string to_string(Eye e);
Axis parse_axis(const std::string& s);
Eye parse_eye(const std::string& s);

struct SequenceMeta {
  std::string participant = "P000";
  int task = 1;  // SPT1..SPT12
  Axis axis = Axis::X;
  Eye eye = Eye::Left;

  // Stable identifier, also used as the file stem on disk.
  std::string id() const;

  friend bool operator==(const SequenceMeta&, const SequenceMeta&) = default;
};

// Fixed-rate gaze samples in degrees of visual angle. Missing samples are
// quiet NaN; infinities are never stored.
class GazeSequence {
 public:
  GazeSequence(std::vector<double> samples, double rate_hz = 1000.0, SequenceMeta meta = {});

  // Same as the constructor but maps +-inf to missing instead of rejecting.
  static GazeSequence from_raw(std::vector<double> samples, double rate_hz = 1000.0,
                               SequenceMeta meta = {});

  std::size_t size() const noexcept { return samples_.size(); }
  double operator[](std::size_t i) const { return samples_[i]; }
  std::span<const double> samples() const noexcept { return samples_; }
  double rate_hz() const noexcept { return rate_hz_; }
  const SequenceMeta& meta() const noexcept { return meta_; }

  std::size_t missing_count() const noexcept;
  bool complete() const noexcept { return missing_count() == 0; }

  // Copy with replaced samples, keeping rate and metadata.
  GazeSequence with_samples(std::vector<double> samples) const;
  GazeSequence with_rate(double rate_hz) const;

  friend bool operator==(const GazeSequence& a, const GazeSequence& b);

 private:
  std::vector<double> samples_;
  double rate_hz_;
  SequenceMeta meta_;
};

// Strictly increasing set of indices into a sequence of `length` samples.
class MissingMask {
 public:
  MissingMask() = default;
  MissingMask(std::vector<std::size_t> indices, std::size_t length);

  static MissingMask of_missing(const GazeSequence& seq);
  static MissingMask range(std::size_t begin, std::size_t end, std::size_t length);

  std::span<const std::size_t> indices() const noexcept { return indices_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  std::size_t length() const noexcept { return length_; }
  bool contains(std::size_t i) const;

  // Run-length form: half-open [begin, end) intervals.
  std::vector<std::pair<std::size_t, std::size_t>> runs() const;
  std::vector<bool> to_bitmap() const;

  friend bool operator==(const MissingMask&, const MissingMask&) = default;

 private:
  std::vector<std::size_t> indices_;
  std::size_t length_ = 0;
};

struct NormalizationParams {
  double mean = 0.0;
  double std = 1.0;

  double apply(double v) const { return (v - mean) / std; }
  double invert(double z) const { return z * std + mean; }
};

// Population statistics over observed samples. Throws on all-missing or
// zero variance input.
NormalizationParams fit_normalization(const GazeSequence& seq);
GazeSequence normalize(const GazeSequence& seq, const NormalizationParams& p);
GazeSequence denormalize(const GazeSequence& seq, const NormalizationParams& p);
std::pair<GazeSequence, NormalizationParams> zscore(const GazeSequence& seq);

enum class Split { Unassigned, Train, Test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct Dataset {
  std::vector<GazeSequence> sequences;
  std::vector<Split> split;  // parallel to sequences

  std::size_t size() const noexcept { return sequences.size(); }
  bool empty() const noexcept { return sequences.empty(); }
  void add(GazeSequence seq, Split s = Split::Unassigned);

  std::vector<std::string> participants() const;  // sorted, distinct
  Dataset subset(Split s) const;
};

// Assigns n_train shuffled participants to Train and the next n_test to
// Test; any others stay Unassigned. (0, 0) on a nonempty dataset is an error.
Dataset split_by_participant(const Dataset& ds, std::size_t n_train, std::size_t n_test,
                             std::uint64_t seed);

// ---- file I/O -------------------------------------------------------------

GazeSequence read_sequence(const std::filesystem::path& file);
void write_sequence(const std::filesystem::path& file, const GazeSequence& seq);

// All *.csv files of a directory, in lexicographic file-name order.
Dataset load_sequences(const std::filesystem::path& dir);

// Writes one CSV per sequence plus manifest.json with split assignment.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_manifest(const std::filesystem::path& manifest);

MissingMask read_mask(const std::filesystem::path& file, std::size_t length);
void write_mask(const std::filesystem::path& file, const MissingMask& mask);

// Keeps large freed blocks in the heap instead of returning them to the OS.
// Training allocates and frees many same-sized matrices per step; without
// this glibc spends a large share of the time in page faults. No-op on other
// allocators.
void tune_allocator();

// Deterministic 64-bit seed mixing.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
std::uint64_t hash_string(const std::string& s);

}  // namespace spem
