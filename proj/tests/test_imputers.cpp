#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "spem/imputers.hpp"

using namespace spem;

namespace {

GazeSequence sinusoid(std::size_t n, double period, double amp = 1.0, double phase = 0.0) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = amp * std::sin(2 * std::numbers::pi * static_cast<double>(i) / period + phase);
  return GazeSequence(v);
}

GazeSequence with_gap(const GazeSequence& s, std::size_t a, std::size_t b) {
  std::vector<double> v(s.samples().begin(), s.samples().end());
  for (std::size_t i = a; i < b; ++i) v[i] = kMissing;
  return s.with_samples(v);
}

void check_contract(const GazeSequence& in, const ImputerOutput& out) {
  REQUIRE(out.sequence.size() == in.size());
  CHECK(out.sequence.complete());
  CHECK(out.filled == MissingMask::of_missing(in));
  for (std::size_t i = 0; i < in.size(); ++i)
    if (!is_missing(in[i])) CHECK(std::bit_cast<std::uint64_t>(out.sequence[i]) ==
                                  std::bit_cast<std::uint64_t>(in[i]));
}

double max_gap_error(const GazeSequence& truth, const GazeSequence& rec, std::size_t a, std::size_t b) {
  double e = 0;
  for (std::size_t i = a; i < b; ++i) e = std::max(e, std::abs(truth[i] - rec[i]));
  return e;
}

}  // namespace

TEST_CASE("PCHIP gap fill") {
  const GazeSequence flat({3.0, 3.0, kMissing, 3.0, 3.0});
  CHECK(impute_pchip(flat).sequence[2] == 3.0);

  std::vector<double> ramp(40);
  for (std::size_t i = 0; i < 40; ++i) ramp[i] = 0.5 * static_cast<double>(i) - 4.0;
  const auto in = with_gap(GazeSequence(ramp), 10, 25);
  const auto out = impute_pchip(in);
  check_contract(in, out);
  for (std::size_t i = 10; i < 25; ++i) CHECK(std::abs(out.sequence[i] - ramp[i]) < 1e-12);

  const GazeSequence edges({kMissing, kMissing, 2.0, 5.0, kMissing});
  const auto e = impute_pchip(edges).sequence;
  CHECK(e[0] == 2.0);
  CHECK(e[1] == 2.0);
  CHECK(e[4] == 5.0);

  CHECK_THROWS_AS(impute_pchip(GazeSequence({kMissing, 1.0, kMissing})), Error);
}

TEST_CASE("PCHIP fill across a gap in monotone data is monotone") {
  std::vector<double> v(60);
  for (std::size_t i = 0; i < 60; ++i) v[i] = std::exp(0.05 * static_cast<double>(i));
  const auto out = impute_pchip(with_gap(GazeSequence(v), 20, 41)).sequence;
  for (std::size_t i = 19; i < 42; ++i) CHECK(out[i + 1] >= out[i]);
}

TEST_CASE("SSA of a pure sinusoid is rank two") {
  const auto s = sinusoid(500, 25.0);
  const auto d = ssa_decompose(s, 50);
  REQUIRE(d.singular_values.size() >= 3);
  CHECK(d.singular_values[2] / d.singular_values[0] < 1e-6);
  CHECK(d.rank_for_energy(0.995) == 2);
}

TEST_CASE("SSA components sum to the series") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<double> v(300);
  for (auto& x : v) x = n(rng);
  const auto d = ssa_decompose(v, 40);
  const auto full = d.reconstruct(d.components.size());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(full[i] - v[i]) < 1e-9);
}

TEST_CASE("SSA of a constant") {
  const GazeSequence c(std::vector<double>(200, 4.0));
  const auto d = ssa_decompose(c, 20);
  for (double v : d.components[0]) CHECK(std::abs(v - 4.0) < 1e-9);
  SsaConfig cfg;
  cfg.window_L = 20;
  const auto in = with_gap(c, 90, 120);
  const auto out = impute_ssa(in, cfg);
  check_contract(in, out);
  for (std::size_t i = 90; i < 120; ++i) CHECK(std::abs(out.sequence[i] - 4.0) < 1e-9);
}

TEST_CASE("SSA rank-two gap imputation of a sinusoid") {
  const auto truth = sinusoid(500, 37.0, 2.0, 0.4);
  SsaConfig cfg;
  cfg.rank_r = 2;
  for (auto blend : {ForecastBlend::Forward, ForecastBlend::Backward, ForecastBlend::Average}) {
    cfg.blend = blend;
    const auto in = with_gap(truth, 200, 260);
    const auto out = impute_ssa(in, cfg);
    check_contract(in, out);
    CHECK(max_gap_error(truth, out.sequence, 200, 260) < 0.01 * 2.0);
  }
}

TEST_CASE("SSA degrades on long gaps") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.05);
  std::vector<double> v(500);
  for (std::size_t i = 0; i < 500; ++i)
    // slow drift in frequency: the recurrence fitted before the gap goes stale
    v[i] = std::sin(2 * std::numbers::pi * static_cast<double>(i) / 60.0 *
                    (1.0 + 0.4 * static_cast<double>(i) / 500.0)) +
           0.4 * std::sin(2 * std::numbers::pi * static_cast<double>(i) / 23.0) + n(rng);
  const GazeSequence truth(v);
  auto err = [&](std::size_t a, std::size_t b) {
    const auto out = impute_ssa(with_gap(truth, a, b)).sequence;
    double e = 0;
    for (std::size_t i = a; i < b; ++i) e += std::abs(out[i] - truth[i]);
    return e / static_cast<double>(b - a);
  };
  CHECK(err(166, 300) > 2.0 * err(230, 236));
}

TEST_CASE("SSA configuration bounds") {
  SsaConfig cfg;
  cfg.window_L = 1;
  CHECK_THROWS_AS(cfg.validate(100), Error);
  cfg.window_L = 60;
  CHECK_THROWS_AS(cfg.validate(100), Error);
  cfg.window_L = 20;
  cfg.rank_r = 21;
  CHECK_THROWS_AS(cfg.validate(100), Error);
  SsaConfig ok;
  CHECK_NOTHROW(impute_ssa(with_gap(sinusoid(500, 20.0), 30, 40), ok));
  CHECK_THROWS_AS(impute_ssa(with_gap(sinusoid(120, 20.0), 40, 80), ok), Error);
}

TEST_CASE("KNN self-match is exact") {
  const auto truth = sinusoid(400, 33.0, 1.5);
  const auto in = with_gap(truth, 150, 170);
  KnnConfig cfg;
  cfg.k = 1;
  const auto out = impute_knn(in, {truth}, cfg);
  check_contract(in, out);
  for (std::size_t i = 150; i < 170; ++i) CHECK(out.sequence[i] == truth[i]);
}

TEST_CASE("KNN bounds and errors") {
  const auto truth = sinusoid(60, 20.0);
  const auto in = with_gap(truth, 20, 30);
  KnnConfig cfg;
  cfg.k = 1000;
  CHECK_THROWS_AS(impute_knn(in, {truth}, cfg), Error);
  CHECK_THROWS_AS(impute_knn(in, {}, {}), Error);
  CHECK_THROWS_AS(impute_knn(with_gap(truth, 3, 55), {truth}, {}), Error);
  KnnConfig bad;
  bad.k = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("KNN with a phase-shifted library stays close") {
  const double period = 50.0;
  const auto truth = sinusoid(500, period);
  const auto in = with_gap(truth, 240, 260);
  std::vector<GazeSequence> lib;
  for (double ph : {0.3, 1.1, 2.0}) lib.push_back(sinusoid(500, period, 1.0, ph));
  KnnConfig cfg;
  cfg.k = 3;
  cfg.weighting = KnnWeighting::InverseDistance;
  const auto out = impute_knn(in, lib, cfg).sequence;
  // every library window is a shifted copy, so the best matches are at most a
  // sampling step out of phase
  CHECK(max_gap_error(truth, out, 240, 260) < 2 * std::numbers::pi / period);
}

TEST_CASE("KNN fills gaps longer than the library windows piecewise") {
  const auto truth = sinusoid(300, 40.0);
  const auto lib = sinusoid(120, 40.0);
  const auto in = with_gap(truth, 50, 230);
  const auto out = impute_knn(in, {lib}, {});
  check_contract(in, out);
}

TEST_CASE("z-score wrapper keeps observed samples bit-exact") {
  std::vector<double> v(300);
  for (std::size_t i = 0; i < 300; ++i) v[i] = 7.0 + 3.0 * std::sin(0.1 * static_cast<double>(i)) + 1e-3 * static_cast<double>(i % 7);
  const auto in = with_gap(GazeSequence(v), 100, 130);
  ZscoreImputer z(std::make_shared<SsaImputer>());
  const auto out = z.impute(in);
  check_contract(in, out);
  CHECK(z.name() == "SSA");
}

TEST_CASE("every imputer honours the common contract on random gaps") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> start(60, 400);
  std::vector<double> v(500);
  for (std::size_t i = 0; i < 500; ++i) v[i] = std::sin(0.07 * static_cast<double>(i)) + 0.2 * std::cos(0.31 * static_cast<double>(i));
  const GazeSequence truth(v);
  std::vector<std::unique_ptr<Imputer>> imps;
  imps.push_back(std::make_unique<PchipImputer>());
  imps.push_back(std::make_unique<SsaImputer>());
  imps.push_back(std::make_unique<KnnImputer>(std::vector<GazeSequence>{sinusoid(500, 90.0)}));
  for (int t = 0; t < 5; ++t) {
    const std::size_t a = start(rng);
    const auto in = with_gap(truth, a, a + 25);
    for (const auto& imp : imps) check_contract(in, imp->impute(in));
  }
}
