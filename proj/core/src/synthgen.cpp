#include "spem/synthgen.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

namespace spem::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string participant_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "P%03zu", i + 1);
  return buf;
}

double wave(double phase, Profile p) {
  if (p == Profile::Sinusoid) return std::sin(phase);
  return 2.0 / std::numbers::pi * std::asin(std::sin(phase));  // triangle, same zero crossings
}

}  // namespace

void StimulusSpec::validate() const {
  if (task < 1 || task > 12) throw Error("stimulus: task must be SPT1..SPT12");
  if (!(amplitude > 0.0)) throw Error("stimulus: amplitude must be positive");
  if (!(frequency > 0.0)) throw Error("stimulus: frequency must be positive");
  if (!(duration_s > 0.0) || !(rate_hz > 0.0)) throw Error("stimulus: bad duration or rate");
  if (fixation_ms < 0.0) throw Error("stimulus: negative fixation");
}

TaskKind task_kind(int task) {
  if (task >= 1 && task <= 4) return TaskKind::Horizontal;
  if (task >= 5 && task <= 8) return TaskKind::Vertical;
  if (task == 9 || task == 10) return TaskKind::HorizontalLemniscate;
  if (task == 11 || task == 12) return TaskKind::VerticalLemniscate;
  throw Error("unknown task SPT" + std::to_string(task));
}

std::vector<Axis> task_axes(int task) {
  switch (task_kind(task)) {
    case TaskKind::Horizontal: return {Axis::X};
    case TaskKind::Vertical: return {Axis::Y};
    default: return {Axis::X, Axis::Y};
  }
}

StimulusSpec preset(int task) {
  static constexpr double kAmp[4] = {5.0, 5.0, 10.0, 10.0};
  static constexpr double kFreq[4] = {0.2, 0.4, 0.2, 0.4};
  StimulusSpec s;
  s.task = task;
  int slot = 0;
  switch (task_kind(task)) {
    case TaskKind::Horizontal: slot = task - 1; break;
    case TaskKind::Vertical: slot = task - 5; break;
    case TaskKind::HorizontalLemniscate: slot = 2 + (task - 9); break;
    case TaskKind::VerticalLemniscate: slot = 2 + (task - 11); break;
  }
  s.amplitude = kAmp[slot];
  s.frequency = kFreq[slot];
  return s;
}

std::pair<GazeSequence, GazeSequence> target_trajectory(const StimulusSpec& spec) {
  spec.validate();
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.rate_hz));
  const double t0 = spec.fixation_ms / 1000.0;
  const double w = kTwoPi * spec.frequency, a = spec.amplitude;
  std::vector<double> x(n, 0.0), y(n, 0.0);
  const TaskKind kind = task_kind(spec.task);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.rate_hz - t0;
    if (t <= 0.0) continue;
    switch (kind) {
      case TaskKind::Horizontal: x[i] = a * wave(w * t, spec.profile); break;
      case TaskKind::Vertical: y[i] = a * wave(w * t, spec.profile); break;
      case TaskKind::HorizontalLemniscate:
        x[i] = a * std::sin(w * t);
        y[i] = 0.5 * a * std::sin(2.0 * w * t);
        break;
      case TaskKind::VerticalLemniscate:
        y[i] = a * std::sin(w * t);
        x[i] = 0.5 * a * std::sin(2.0 * w * t);
        break;
    }
  }
  SequenceMeta mx{"target", spec.task, Axis::X, Eye::Left};
  SequenceMeta my{"target", spec.task, Axis::Y, Eye::Left};
  return {GazeSequence(std::move(x), spec.rate_hz, mx), GazeSequence(std::move(y), spec.rate_hz, my)};
}

void PursuitModelSpec::validate() const {
  if (!(gain > 0.0 && gain <= 1.0)) throw Error("pursuit model: gain must be in (0, 1]");
  if (!(latency_ms >= 0.0)) throw Error("pursuit model: latency must be >= 0");
  if (!(noise_std >= 0.0)) throw Error("pursuit model: noise_std must be >= 0");
  if (!(catchup_rate >= 0.0)) throw Error("pursuit model: catchup_rate must be >= 0");
}

GazeSequence simulate_pursuit(const GazeSequence& target, const PursuitModelSpec& model,
                              std::uint64_t seed) {
  model.validate();
  if (!target.complete()) throw Error("simulate_pursuit: target has missing values");
  const std::size_t n = target.size();
  const auto lag = static_cast<std::size_t>(std::llround(model.latency_ms * target.rate_hz() / 1000.0));
  const double alpha =
      std::isinf(model.catchup_rate) ? 1.0 : 1.0 - std::exp(-model.catchup_rate / target.rate_hz());

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> out(n);
  double eye = model.gain * target[0];
  for (std::size_t i = 0; i < n; ++i) {
    const double drive = model.gain * target[i >= lag ? i - lag : 0];
    eye += alpha * (drive - eye);
    out[i] = eye;
  }
  if (model.noise_std > 0.0)
    for (double& v : out) v += model.noise_std * noise(rng);
  return target.with_samples(std::move(out));
}

// ---- corpus ---------------------------------------------------------------

namespace {

double uniform(std::mt19937_64& rng, const Range& r) {
  if (r.hi <= r.lo) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

std::uint64_t sequence_seed(std::uint64_t seed, std::size_t participant, int task, Axis axis,
                            Eye eye) {
  std::uint64_t s = mix_seed(seed, participant);
  s = mix_seed(s, static_cast<std::uint64_t>(task));
  s = mix_seed(s, axis == Axis::X ? 1 : 2);
  return mix_seed(s, eye == Eye::Left ? 3 : 4);
}

}  // namespace

Dataset make_corpus(const CorpusSpec& spec, std::uint64_t seed) {
  if (spec.n_participants == 0) throw Error("make_corpus: n_participants must be > 0");
  Dataset ds;
  for (std::size_t p = 0; p < spec.n_participants; ++p) {
    const std::string pid = participant_id(p);
    for (int task : spec.tasks) {
      StimulusSpec stim = preset(task);
      stim.duration_s = spec.duration_s;
      stim.rate_hz = spec.rate_hz;
      stim.profile = spec.profile;
      const auto [tx, ty] = target_trajectory(stim);

      std::mt19937_64 mrng(mix_seed(mix_seed(seed, p), 1000 + static_cast<std::uint64_t>(task)));
      PursuitModelSpec model;
      model.gain = uniform(mrng, spec.ranges.gain);
      model.latency_ms = uniform(mrng, spec.ranges.latency_ms);
      model.noise_std = uniform(mrng, spec.ranges.noise_std);
      model.catchup_rate = uniform(mrng, spec.ranges.catchup_rate);

      for (Axis axis : task_axes(task)) {
        const GazeSequence& target = axis == Axis::X ? tx : ty;
        for (Eye eye : {Eye::Left, Eye::Right}) {
          auto eye_seq = simulate_pursuit(target, model, sequence_seed(seed, p, task, axis, eye));
          std::vector<double> v(eye_seq.samples().begin(), eye_seq.samples().end());
          ds.add(GazeSequence(std::move(v), spec.rate_hz, SequenceMeta{pid, task, axis, eye}));
        }
      }
    }
  }
  return ds;
}

Dataset make_corpus(std::size_t n_participants, const std::vector<int>& tasks,
                    const ModelRanges& ranges, std::uint64_t seed) {
  CorpusSpec spec;
  spec.n_participants = n_participants;
  spec.tasks = tasks;
  spec.ranges = ranges;
  return make_corpus(spec, seed);
}

GazeSequence add_natural_blinks(const GazeSequence& seq, const NaturalBlinkSpec& spec,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(seq.samples().begin(), seq.samples().end());
  const std::size_t n = v.size();
  const double per_ms = seq.rate_hz() / 1000.0;
  const auto count = std::poisson_distribution<int>(spec.mean_count)(rng);
  std::lognormal_distribution<double> dur_ms(std::log(spec.duration_median_ms),
                                             spec.duration_log_sigma);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto art = static_cast<std::size_t>(std::llround(spec.artifact_ms * per_ms));

  for (int b = 0; b < count; ++b) {
    const double ms = std::min(dur_ms(rng), spec.max_duration_ms);
    const auto dur = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ms * per_ms)));
    if (dur + 2 * art + 2 >= n) continue;
    const auto onset = art + 1 + static_cast<std::size_t>(unit(rng) * static_cast<double>(n - dur - 2 * art - 2));
    const double dir = unit(rng) < 0.5 ? -1.0 : 1.0;
    // lid closure drags the estimate away sharply on both sides of the dropout
    for (std::size_t k = 1; k <= art; ++k) {
      const double w = static_cast<double>(art - k + 1) / static_cast<double>(art);
      if (!is_missing(v[onset - k])) v[onset - k] += dir * spec.artifact_deg * w * w;
      if (onset + dur + k - 1 < n && !is_missing(v[onset + dur + k - 1]))
        v[onset + dur + k - 1] += dir * spec.artifact_deg * w * w;
    }
    for (std::size_t i = onset; i < onset + dur; ++i) v[i] = kMissing;
  }
  return seq.with_samples(std::move(v));
}

std::pair<Dataset, Dataset> make_recorded_corpus(const CorpusSpec& spec,
                                                 const NaturalBlinkSpec& blinks,
                                                 std::uint64_t seed) {
  Dataset clean = make_corpus(spec, seed);
  Dataset recorded;
  for (std::size_t i = 0; i < clean.size(); ++i)
    recorded.add(add_natural_blinks(clean.sequences[i], blinks, mix_seed(seed ^ 0xb11c, i)),
                 clean.split[i]);
  return {std::move(clean), std::move(recorded)};
}

// ---- JSON -----------------------------------------------------------------

namespace {

Range range_from(const nlohmann::json& j, const char* key, Range def) {
  if (!j.contains(key)) return def;
  const auto& r = j.at(key);
  if (r.is_number()) return {r.get<double>(), r.get<double>()};
  return {r.at(0).get<double>(), r.at(1).get<double>()};
}

}  // namespace

CorpusSpec corpus_spec_from_json(const std::string& text) {
  CorpusSpec s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.n_participants = j.value("n_participants", s.n_participants);
    if (j.contains("tasks")) s.tasks = j.at("tasks").get<std::vector<int>>();
    s.duration_s = j.value("duration_s", s.duration_s);
    s.rate_hz = j.value("rate_hz", s.rate_hz);
    const std::string prof = j.value("profile", std::string("sinusoid"));
    if (prof == "sinusoid")
      s.profile = Profile::Sinusoid;
    else if (prof == "triangular")
      s.profile = Profile::Triangular;
    else
      throw Error("unknown profile '" + prof + "'");
    if (j.contains("model")) {
      const auto& m = j.at("model");
      s.ranges.gain = range_from(m, "gain", s.ranges.gain);
      s.ranges.latency_ms = range_from(m, "latency_ms", s.ranges.latency_ms);
      s.ranges.noise_std = range_from(m, "noise_std", s.ranges.noise_std);
      s.ranges.catchup_rate = range_from(m, "catchup_rate", s.ranges.catchup_rate);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("corpus config: ") + e.what());
  }
  for (int t : s.tasks) (void)task_kind(t);
  return s;
}

std::string to_json(const CorpusSpec& s) {
  nlohmann::ordered_json j;
  j["n_participants"] = s.n_participants;
  j["tasks"] = s.tasks;
  j["duration_s"] = s.duration_s;
  j["rate_hz"] = s.rate_hz;
  j["profile"] = s.profile == Profile::Sinusoid ? "sinusoid" : "triangular";
  auto r = [](const Range& x) { return nlohmann::json::array({x.lo, x.hi}); };
  j["model"] = {{"gain", r(s.ranges.gain)},
                {"latency_ms", r(s.ranges.latency_ms)},
                {"noise_std", r(s.ranges.noise_std)},
                {"catchup_rate", r(s.ranges.catchup_rate)}};
  return j.dump(2);
}

}  // namespace spem::synth
