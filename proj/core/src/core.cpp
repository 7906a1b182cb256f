#include "spem/core.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace spem {

namespace fs = std::filesystem;
using nlohmann::json;

ParseError::ParseError(fs::path file, std::size_t line, const std::string& what)
    : Error(file.string() + ":" + std::to_string(line) + ": " + what),
      file_(std::move(file)),
      line_(line) {}

std::string to_string(Axis a) { return a == Axis::X ? "x" : "y"; }
std::string to_string(Eye e) { return e == Eye::Left ? "L" : "R"; }

Axis parse_axis(const std::string& s) {
  if (s == "x") return Axis::X;
  if (s == "y") return Axis::Y;
  throw Error("unknown axis '" + s + "'");
}

Eye parse_eye(const std::string& s) {
  if (s == "L") return Eye::Left;
  if (s == "R") return Eye::Right;
  throw Error("unknown eye '" + s + "'");
}

std::string SequenceMeta::id() const {
  return participant + "_SPT" + std::to_string(task) + "_" + to_string(axis) + "_" +
         to_string(eye);
}

// ---- GazeSequence ---------------------------------------------------------

GazeSequence::GazeSequence(std::vector<double> samples, double rate_hz, SequenceMeta meta)
    : samples_(std::move(samples)), rate_hz_(rate_hz), meta_(std::move(meta)) {
  if (samples_.empty()) throw Error("GazeSequence: empty sample list");
  if (!(rate_hz_ > 0.0) || !std::isfinite(rate_hz_))
    throw Error("GazeSequence: rate_hz must be positive");
  if (meta_.task < 1 || meta_.task > 12) throw Error("GazeSequence: task must be SPT1..SPT12");
  for (double v : samples_)
    if (std::isinf(v)) throw Error("GazeSequence: infinite sample");
}

GazeSequence GazeSequence::from_raw(std::vector<double> samples, double rate_hz,
                                    SequenceMeta meta) {
  for (double& v : samples)
    if (std::isinf(v)) v = kMissing;
  return GazeSequence(std::move(samples), rate_hz, std::move(meta));
}

std::size_t GazeSequence::missing_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(samples_.begin(), samples_.end(), is_missing));
}

GazeSequence GazeSequence::with_samples(std::vector<double> samples) const {
  return GazeSequence(std::move(samples), rate_hz_, meta_);
}

GazeSequence GazeSequence::with_rate(double rate_hz) const {
  return GazeSequence(samples_, rate_hz, meta_);
}

bool operator==(const GazeSequence& a, const GazeSequence& b) {
  if (a.rate_hz_ != b.rate_hz_ || !(a.meta_ == b.meta_) || a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.samples_[i], y = b.samples_[i];
    if (is_missing(x) != is_missing(y)) return false;
    if (!is_missing(x) && x != y) return false;
  }
  return true;
}

// ---- MissingMask ----------------------------------------------------------

MissingMask::MissingMask(std::vector<std::size_t> indices, std::size_t length)
    : indices_(std::move(indices)), length_(length) {
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (indices_[k] >= length_) throw Error("MissingMask: index out of range");
    if (k > 0 && indices_[k] <= indices_[k - 1])
      throw Error("MissingMask: indices must be strictly increasing");
  }
}

MissingMask MissingMask::of_missing(const GazeSequence& seq) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (is_missing(seq[i])) idx.push_back(i);
  return MissingMask(std::move(idx), seq.size());
}

MissingMask MissingMask::range(std::size_t begin, std::size_t end, std::size_t length) {
  if (begin > end || end > length) throw Error("MissingMask::range: invalid bounds");
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return MissingMask(std::move(idx), length);
}

bool MissingMask::contains(std::size_t i) const {
  return std::binary_search(indices_.begin(), indices_.end(), i);
}

std::vector<std::pair<std::size_t, std::size_t>> MissingMask::runs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i : indices_) {
    if (!out.empty() && out.back().second == i)
      ++out.back().second;
    else
      out.emplace_back(i, i + 1);
  }
  return out;
}

std::vector<bool> MissingMask::to_bitmap() const {
  std::vector<bool> bits(length_, false);
  for (std::size_t i : indices_) bits[i] = true;
  return bits;
}

// ---- normalization --------------------------------------------------------

NormalizationParams fit_normalization(const GazeSequence& seq) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : seq.samples())
    if (!is_missing(v)) {
      sum += v;
      ++n;
    }
  if (n == 0) throw Error("zscore: sequence has no observed samples");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : seq.samples())
    if (!is_missing(v)) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (!(sd > 0.0)) throw Error("zscore: zero variance over observed samples");
  return {mean, sd};
}

GazeSequence normalize(const GazeSequence& seq, const NormalizationParams& p) {
  std::vector<double> out(seq.samples().begin(), seq.samples().end());
  for (double& v : out)
    if (!is_missing(v)) v = p.apply(v);
  return seq.with_samples(std::move(out));
}

GazeSequence denormalize(const GazeSequence& seq, const NormalizationParams& p) {
  std::vector<double> out(seq.samples().begin(), seq.samples().end());
  for (double& v : out)
    if (!is_missing(v)) v = p.invert(v);
  return seq.with_samples(std::move(out));
}

std::pair<GazeSequence, NormalizationParams> zscore(const GazeSequence& seq) {
  const auto p = fit_normalization(seq);
  return {normalize(seq, p), p};
}

// ---- Dataset --------------------------------------------------------------

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Unassigned: break;
  }
  return "unassigned";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  if (s == "unassigned") return Split::Unassigned;
  throw Error("unknown split '" + s + "'");
}

void Dataset::add(GazeSequence seq, Split s) {
  sequences.push_back(std::move(seq));
  split.push_back(s);
}

std::vector<std::string> Dataset::participants() const {
  std::set<std::string> ids;
  for (const auto& s : sequences) ids.insert(s.meta().participant);
  return {ids.begin(), ids.end()};
}

Dataset Dataset::subset(Split s) const {
  Dataset out;
  for (std::size_t i = 0; i < sequences.size(); ++i)
    if (split[i] == s) out.add(sequences[i], s);
  return out;
}

Dataset split_by_participant(const Dataset& ds, std::size_t n_train, std::size_t n_test,
                             std::uint64_t seed) {
  auto ids = ds.participants();
  if (n_train + n_test > ids.size())
    throw Error("split_by_participant: requested " + std::to_string(n_train + n_test) +
                " participants but dataset has " + std::to_string(ids.size()));
  if (n_train + n_test == 0 && !ds.empty())
    throw Error("split_by_participant: empty split would leave every sequence unassigned");

  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::map<std::string, Split> assign;
  for (std::size_t i = 0; i < ids.size(); ++i)
    assign[ids[i]] = i < n_train ? Split::Train
                     : i < n_train + n_test ? Split::Test
                                            : Split::Unassigned;

  Dataset out;
  for (const auto& s : ds.sequences) out.add(s, assign.at(s.meta().participant));
  return out;
}

// ---- CSV ------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  if (s == "inf" || s == "+inf" || s == "Inf" || s == "-inf" || s == "-Inf") {
    out = s[0] == '-' ? -std::numeric_limits<double>::infinity()
                      : std::numeric_limits<double>::infinity();
    return true;
  }
  const char* b = s.data();
  if (!s.empty() && s[0] == '+') ++b;
  auto res = std::from_chars(b, s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

SequenceMeta parse_header(const std::string& line, const fs::path& file, double& rate) {
  if (line.rfind('#', 0) != 0) throw ParseError(file, 1, "missing '#' metadata header");
  SequenceMeta meta;
  bool seen_rate = false;
  std::istringstream is(line.substr(1));
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ParseError(file, 1, "bad header token '" + tok + "'");
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    try {
      if (key == "participant") {
        meta.participant = val;
      } else if (key == "task") {
        if (val.rfind("SPT", 0) != 0) throw Error("task must be SPT<n>");
        meta.task = std::stoi(val.substr(3));
      } else if (key == "axis") {
        meta.axis = parse_axis(val);
      } else if (key == "eye") {
        meta.eye = parse_eye(val);
      } else if (key == "rate_hz") {
        if (!parse_double(val, rate)) throw Error("non-numeric rate");
        seen_rate = true;
      }
    } catch (const std::exception& e) {
      throw ParseError(file, 1, std::string("header: ") + e.what());
    }
  }
  if (!seen_rate) rate = 1000.0;
  return meta;
}

}  // namespace

GazeSequence read_sequence(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file, 0, "cannot open file");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(file, 1, "empty file");
  double rate = 1000.0;
  SequenceMeta meta = parse_header(trim(line), file, rate);

  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw ParseError(file, lineno, "expected 2 columns 'index,value'");
    const std::string idx_s = trim(line.substr(0, comma));
    const std::string val_s = trim(line.substr(comma + 1));
    std::size_t idx = 0;
    auto res = std::from_chars(idx_s.data(), idx_s.data() + idx_s.size(), idx);
    if (res.ec != std::errc() || res.ptr != idx_s.data() + idx_s.size())
      throw ParseError(file, lineno, "non-numeric index '" + idx_s + "'");
    if (idx != values.size())
      throw ParseError(file, lineno, "index " + idx_s + " out of sequence");
    double v = 0.0;
    if (val_s == "NA" || val_s == "NaN" || val_s == "nan") {
      v = kMissing;
    } else if (!parse_double(val_s, v)) {
      throw ParseError(file, lineno, "non-numeric value '" + val_s + "'");
    }
    values.push_back(v);
  }
  if (values.empty()) throw ParseError(file, lineno, "no samples");
  try {
    return GazeSequence::from_raw(std::move(values), rate, std::move(meta));
  } catch (const Error& e) {
    throw ParseError(file, 1, e.what());
  }
}

void write_sequence(const fs::path& file, const GazeSequence& seq) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  const auto& m = seq.meta();
  out << "# participant=" << m.participant << " task=SPT" << m.task << " axis=" << to_string(m.axis)
      << " eye=" << to_string(m.eye) << " rate_hz=" << format_double(seq.rate_hz()) << "\n";
  for (std::size_t i = 0; i < seq.size(); ++i) {
    out << i << ',';
    if (is_missing(seq[i]))
      out << "NA";
    else
      out << format_double(seq[i]);
    out << '\n';
  }
}

Dataset load_sequences(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  Dataset ds;
  for (const auto& f : files) ds.add(read_sequence(f));
  return ds;
}

void save_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir);
  json manifest;
  manifest["version"] = 1;
  manifest["sequences"] = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::string name = ds.sequences[i].meta().id() + ".csv";
    write_sequence(dir / name, ds.sequences[i]);
    manifest["sequences"].push_back({{"file", name}, {"split", to_string(ds.split[i])}});
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
}

Dataset load_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error("cannot open manifest " + manifest.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(manifest, 0, e.what());
  }
  Dataset ds;
  const fs::path base = manifest.parent_path();
  for (const auto& entry : j.at("sequences")) {
    const fs::path f = entry.at("file").get<std::string>();
    ds.add(read_sequence(f.is_absolute() ? f : base / f),
           parse_split(entry.value("split", std::string("unassigned"))));
  }
  return ds;
}

MissingMask read_mask(const fs::path& file, std::size_t length) {
  std::ifstream in(file);
  if (!in) throw ParseError(file, 0, "cannot open mask file");
  std::vector<std::size_t> idx;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::size_t v = 0;
    auto res = std::from_chars(line.data(), line.data() + line.size(), v);
    if (res.ec != std::errc() || res.ptr != line.data() + line.size())
      throw ParseError(file, lineno, "non-numeric mask index");
    idx.push_back(v);
  }
  try {
    return MissingMask(std::move(idx), length);
  } catch (const Error& e) {
    throw ParseError(file, lineno, e.what());
  }
}

void write_mask(const fs::path& file, const MissingMask& mask) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  for (std::size_t i : mask.indices()) out << i << '\n';
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over the combined word
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace spem
