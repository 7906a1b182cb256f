#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spem/metrics.hpp"
#include "spem/synthgen.hpp"

using namespace spem;
using namespace spem::synth;

TEST_CASE("SPT1 starts at the center and stays on x") {
  const auto [x, y] = target_trajectory(preset(1));
  CHECK(x.size() == 15000);
  CHECK(x[0] == 0.0);
  CHECK(y[0] == 0.0);
  CHECK(std::all_of(y.samples().begin(), y.samples().end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("SPT5 moves only along y") {
  const auto [x, y] = target_trajectory(preset(5));
  CHECK(std::all_of(x.samples().begin(), x.samples().end(), [](double v) { return v == 0.0; }));
  CHECK(*std::max_element(y.samples().begin(), y.samples().end()) > 1.0);
}

TEST_CASE("Gerono lemniscate extrema and axis relation") {
  auto spec = preset(9);
  spec.fixation_ms = 0.0;
  spec.duration_s = 1.0 / spec.frequency;  // one full period
  const auto [x, y] = target_trajectory(spec);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx = std::max(mx, std::abs(x[i]));
    my = std::max(my, std::abs(y[i]));
    // y = (A/2) sin(2wt) = A sin(wt) cos(wt)
    const double t = static_cast<double>(i) / spec.rate_hz;
    const double w = 2 * std::numbers::pi * spec.frequency;
    CHECK(std::abs(y[i] - 0.5 * spec.amplitude * std::sin(2 * w * t)) < 1e-12);
  }
  CHECK(mx == doctest::Approx(spec.amplitude).epsilon(1e-6));
  CHECK(my == doctest::Approx(spec.amplitude / 2).epsilon(1e-6));

  auto v = preset(11);
  const auto [vx, vy] = target_trajectory(v);
  CHECK(*std::max_element(vy.samples().begin(), vy.samples().end()) ==
        doctest::Approx(v.amplitude).epsilon(1e-4));
}

TEST_CASE("identity observer reproduces the target") {
  const auto [x, y] = target_trajectory(preset(2));
  const auto out = simulate_pursuit(x, {}, 1);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(out[i] - x[i]) < 1e-9);
}

TEST_CASE("pursuit gain shows as steady-state amplitude ratio") {
  auto spec = preset(1);
  const auto [x, y] = target_trajectory(spec);
  PursuitModelSpec m;
  m.gain = 0.9;
  m.catchup_rate = 30.0;
  const auto out = simulate_pursuit(x, m, 1);
  // amplitude over the last 5 s (one full cycle at 0.2 Hz), well past the transient
  double peak_in = 0, peak_out = 0;
  for (std::size_t i = 10000; i < x.size(); ++i) {
    peak_in = std::max(peak_in, std::abs(x[i]));
    peak_out = std::max(peak_out, std::abs(out[i]));
  }
  CHECK(peak_out / peak_in == doctest::Approx(0.9).epsilon(0.01 / 0.9));
}

TEST_CASE("pursuit is deterministic and rejects missing targets") {
  const auto [x, y] = target_trajectory(preset(3));
  PursuitModelSpec m;
  m.noise_std = 0.05;
  CHECK(simulate_pursuit(x, m, 5) == simulate_pursuit(x, m, 5));
  CHECK_FALSE(simulate_pursuit(x, m, 5) == simulate_pursuit(x, m, 6));
  CHECK_THROWS_AS(simulate_pursuit(GazeSequence({1.0, kMissing}), m, 1), Error);
  m.gain = 1.5;
  CHECK_THROWS_AS(simulate_pursuit(x, m, 1), Error);
}

TEST_CASE("corpus sizes follow the axis convention") {
  CorpusSpec one;
  one.n_participants = 1;
  one.tasks = {1};
  one.duration_s = 0.5;
  const auto ds = make_corpus(one, 3);
  REQUIRE(ds.size() == 2);
  CHECK(ds.sequences[0].meta().eye != ds.sequences[1].meta().eye);
  CHECK(ds.sequences[0].meta().axis == Axis::X);

  CorpusSpec full;
  full.n_participants = 172;
  full.duration_s = 0.01;
  CHECK(make_corpus(full, 3).size() == 5504);
}

TEST_CASE("corpus is complete, finite and deterministic") {
  CorpusSpec spec;
  spec.n_participants = 2;
  spec.tasks = {1, 6, 9};
  const auto a = make_corpus(spec, 11);
  const auto b = make_corpus(spec, 11);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.sequences[i] == b.sequences[i]);
    CHECK(a.sequences[i].complete());
    for (double v : a.sequences[i].samples()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("dominant spectral peak sits at the stimulus frequency") {
  CorpusSpec spec;
  spec.n_participants = 1;
  spec.tasks = {2, 4};
  for (const auto& s : make_corpus(spec, 2).sequences) {
    const auto stim = preset(s.meta().task);
    const auto X = metrics::dft(s);
    std::size_t best = 1;
    for (std::size_t k = 1; k < X.size() / 2; ++k)
      if (std::abs(X.coefficients[k]) > std::abs(X.coefficients[best])) best = k;
    CHECK(std::abs(X.frequency(best) - stim.frequency) <= X.bin_hz);
  }
}

TEST_CASE("natural blinks leave the first sample and produce missing runs") {
  CorpusSpec spec;
  spec.n_participants = 3;
  spec.tasks = {1, 2};
  NaturalBlinkSpec nb;
  nb.mean_count = 3.0;
  const auto [clean, rec] = make_recorded_corpus(spec, nb, 4);
  std::size_t with_gaps = 0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    CHECK_FALSE(is_missing(rec.sequences[i][0]));
    if (!rec.sequences[i].complete()) ++with_gaps;
  }
  CHECK(with_gaps > rec.size() / 2);
}
