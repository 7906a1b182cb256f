#include "spem/blinks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace spem::blinks {

namespace {

std::vector<std::pair<std::size_t, std::size_t>> missing_runs(const GazeSequence& seq) {
  return MissingMask::of_missing(seq).runs();
}

bool steep(const GazeSequence& s, std::size_t a, std::size_t b, double thresh) {
  return std::abs(s[a] - s[b]) > thresh;
}

}  // namespace

std::vector<BlinkEvent> detect_blinks(const GazeSequence& seq, const DetectionParams& p) {
  std::vector<BlinkEvent> events;
  for (auto [a, b] : missing_runs(seq)) {
    BlinkEvent ev{a, b, Source::Detected};
    if (p.extend) {
      // walk left over steep samples
      std::size_t stable = 0;
      for (std::size_t k = a; k-- > 1;) {
        if (is_missing(seq[k]) || is_missing(seq[k - 1])) break;
        if (steep(seq, k, k - 1, p.slope_thresh)) {
          ev.onset = k;
          stable = 0;
        } else if (++stable >= p.stable_run) {
          break;
        }
      }
      stable = 0;
      for (std::size_t k = b; k + 1 < seq.size(); ++k) {
        if (is_missing(seq[k]) || is_missing(seq[k + 1])) break;
        if (steep(seq, k, k + 1, p.slope_thresh)) {
          ev.offset = k + 1;
          stable = 0;
        } else if (++stable >= p.stable_run) {
          break;
        }
      }
    }
    events.push_back(ev);
  }

  std::vector<BlinkEvent> merged;
  for (const auto& ev : events) {
    if (!merged.empty() && ev.onset < merged.back().offset + p.merge_gap)
      merged.back().offset = std::max(merged.back().offset, ev.offset);
    else
      merged.push_back(ev);
  }
  return merged;
}

void BlinkStats::merge(const BlinkStats& o) {
  durations.insert(durations.end(), o.durations.begin(), o.durations.end());
  positions.insert(positions.end(), o.positions.begin(), o.positions.end());
  counts.insert(counts.end(), o.counts.begin(), o.counts.end());
}

BlinkStats blink_statistics(const Dataset& ds, const DetectionParams& p) {
  if (ds.empty()) throw Error("blink_statistics: empty dataset");
  BlinkStats st;
  for (const auto& seq : ds.sequences) {
    const auto events = detect_blinks(seq, p);
    st.counts.push_back(events.size());
    for (const auto& ev : events) {
      st.durations.push_back(ev.duration());
      st.positions.push_back(ev.onset);
    }
  }
  return st;
}

std::string to_json(const BlinkStats& s) {
  nlohmann::ordered_json j;
  j["durations"] = s.durations;
  j["positions"] = s.positions;
  j["counts"] = s.counts;
  return j.dump();
}

BlinkStats stats_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    BlinkStats s;
    s.durations = j.at("durations").get<std::vector<std::size_t>>();
    s.positions = j.at("positions").get<std::vector<std::size_t>>();
    s.counts = j.at("counts").get<std::vector<std::size_t>>();
    for (std::size_t d : s.durations)
      if (d < 1) throw Error("blink durations must be >= 1");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("blink stats: ") + e.what());
  }
}

BlinkStats read_stats(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return stats_from_json(ss.str());
}

void write_stats(const std::filesystem::path& file, const BlinkStats& s) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << to_json(s) << '\n';
}

GazeSequence apply_mask(const GazeSequence& seq, const MissingMask& mask) {
  if (mask.length() != seq.size()) throw Error("apply_mask: length mismatch");
  std::vector<double> v(seq.samples().begin(), seq.samples().end());
  for (std::size_t i : mask.indices()) v[i] = kMissing;
  return seq.with_samples(std::move(v));
}

namespace {

template <class T>
const T& draw(const std::vector<T>& pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return pool[pick(rng)];
}

// Clamp a drawn (start, duration) to [1, length), shortening at the end.
std::pair<std::size_t, std::size_t> place(std::size_t start, std::size_t duration,
                                          std::size_t length) {
  start = std::clamp<std::size_t>(start, 1, length - 1);
  const std::size_t end = std::min(length, start + duration);
  return {start, end};
}

std::vector<BlinkEvent> coalesce(std::vector<BlinkEvent> evs) {
  std::sort(evs.begin(), evs.end(),
            [](const BlinkEvent& a, const BlinkEvent& b) { return a.onset < b.onset; });
  std::vector<BlinkEvent> out;
  for (const auto& e : evs) {
    if (!out.empty() && e.onset <= out.back().offset)
      out.back().offset = std::max(out.back().offset, e.offset);
    else
      out.push_back(e);
  }
  return out;
}

MissingMask mask_of(const std::vector<BlinkEvent>& evs, std::size_t length) {
  std::vector<std::size_t> idx;
  for (const auto& e : evs)
    for (std::size_t i = e.onset; i < e.offset; ++i) idx.push_back(i);
  return MissingMask(std::move(idx), length);
}

void check_stats(const BlinkStats& s) {
  if (s.counts.empty()) throw Error("inject_blinks: empty blink statistics");
  const bool any = std::any_of(s.counts.begin(), s.counts.end(), [](auto c) { return c > 0; });
  if (any && (s.durations.empty() || s.positions.empty()))
    throw Error("inject_blinks: statistics have counts but no durations/positions");
}

}  // namespace

Injection inject_blinks(const GazeSequence& seq, const BlinkStats& stats, std::uint64_t seed) {
  check_stats(stats);
  if (!seq.complete()) throw Error("inject_blinks: sequence already has missing values");
  if (seq.size() < 2) throw Error("inject_blinks: sequence too short");

  std::mt19937_64 rng(seed);
  const std::size_t n = draw(stats.counts, rng);
  std::vector<BlinkEvent> evs;
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t dur = draw(stats.durations, rng);
    const std::size_t pos = draw(stats.positions, rng);
    auto [s, e] = place(pos, dur, seq.size());
    evs.push_back({s, e, Source::Artificial});
  }
  evs = coalesce(std::move(evs));
  auto mask = mask_of(evs, seq.size());
  return {apply_mask(seq, mask), std::move(mask), std::move(evs)};
}

MissingMask sample_mask_at_rate(std::size_t length, const BlinkStats& stats,
                                double target_fraction, std::uint64_t seed,
                                std::size_t max_blinks) {
  if (stats.durations.empty() || stats.positions.empty())
    throw Error("sample_mask_at_rate: statistics have no blinks");
  if (length < 2) throw Error("sample_mask_at_rate: sequence too short");
  std::mt19937_64 rng(seed);
  std::vector<bool> hit(length, false);
  std::size_t masked = 0;
  const auto target = static_cast<std::size_t>(std::ceil(target_fraction * static_cast<double>(length)));
  for (std::size_t b = 0; b < max_blinks && masked < target; ++b) {
    const std::size_t dur = draw(stats.durations, rng);
    const std::size_t pos = draw(stats.positions, rng);
    auto [s, e] = place(pos, dur, length);
    for (std::size_t i = s; i < e; ++i)
      if (!hit[i]) {
        hit[i] = true;
        ++masked;
      }
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < length; ++i)
    if (hit[i]) idx.push_back(i);
  return MissingMask(std::move(idx), length);
}

Injection large_gap_inject(const GazeSequence& seq, double begin_ms, double end_ms) {
  const auto begin = static_cast<std::size_t>(std::llround(begin_ms * seq.rate_hz() / 1000.0));
  const auto end = static_cast<std::size_t>(std::llround(end_ms * seq.rate_hz() / 1000.0));
  if (end <= begin) throw Error("large_gap_inject: empty gap");
  if (seq.size() < end)
    throw Error("large_gap_inject: sequence too short (" + std::to_string(seq.size()) +
                " samples, gap ends at " + std::to_string(end) + ")");
  if (!seq.complete()) throw Error("large_gap_inject: sequence already has missing values");
  auto mask = MissingMask::range(begin, end, seq.size());
  return {apply_mask(seq, mask), mask, {{begin, end, Source::Artificial}}};
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace spem::blinks
