#include "spem/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <fftw3.h>
#include <nlohmann/json.hpp>

namespace spem::metrics {

namespace {

void check_pair(const GazeSequence& x, const GazeSequence& xhat, const MissingMask& mask) {
  if (x.size() != xhat.size()) throw Error("metrics: length mismatch");
  if (mask.length() != x.size()) throw Error("metrics: mask length mismatch");
  if (mask.empty()) throw Error("metrics: empty imputation mask");
  for (std::size_t i : mask.indices())
    if (is_missing(x[i]) || is_missing(xhat[i]))
      throw Error("metrics: missing value at scored position " + std::to_string(i));
}

double mean_at(const GazeSequence& s, const MissingMask& mask) {
  double acc = 0.0;
  for (std::size_t i : mask.indices()) acc += s[i];
  return acc / static_cast<double>(mask.size());
}

}  // namespace

double mae(const GazeSequence& x, const GazeSequence& xhat, const MissingMask& mask) {
  check_pair(x, xhat, mask);
  double acc = 0.0;
  for (std::size_t i : mask.indices()) acc += std::abs(x[i] - xhat[i]);
  return acc / static_cast<double>(mask.size());
}

MreResult mre(const GazeSequence& x, const GazeSequence& xhat, const MissingMask& mask) {
  check_pair(x, xhat, mask);
  double acc = 0.0;
  std::size_t used = 0, excluded = 0;
  for (std::size_t i : mask.indices()) {
    if (x[i] == 0.0) {
      ++excluded;
      continue;
    }
    acc += std::abs((x[i] - xhat[i]) / x[i]);
    ++used;
  }
  if (used == 0) throw Error("mre: every scored position has x_i = 0");
  return {acc / static_cast<double>(used), excluded};
}

double rmse(const GazeSequence& x, const GazeSequence& xhat, const MissingMask& mask) {
  check_pair(x, xhat, mask);
  double acc = 0.0;
  for (std::size_t i : mask.indices()) acc += (x[i] - xhat[i]) * (x[i] - xhat[i]);
  return std::sqrt(acc / static_cast<double>(mask.size()));
}

double sim(const GazeSequence& x, const GazeSequence& xhat, const MissingMask& mask) {
  check_pair(x, xhat, mask);
  if (mask.size() < 2) throw Error("sim: needs at least 2 scored positions");
  const double mx = mean_at(x, mask), my = mean_at(xhat, mask);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i : mask.indices()) {
    const double dx = x[i] - mx, dy = xhat[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw Error("sim: constant signal at scored positions");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double fsd(const GazeSequence& x, const GazeSequence& xhat, const MissingMask& mask) {
  const double err = rmse(x, xhat, mask);
  const double mx = mean_at(x, mask);
  double ss = 0.0;
  for (std::size_t i : mask.indices()) ss += (x[i] - mx) * (x[i] - mx);
  const double sd = std::sqrt(ss / static_cast<double>(mask.size()));
  if (!(sd > 0.0)) throw Error("fsd: zero variance of ground truth at scored positions");
  return err / sd;
}

// ---- spectra --------------------------------------------------------------

double SpectralCoefficients::frequency(std::size_t k) const {
  const std::size_t K = coefficients.size();
  return static_cast<double>(std::min(k, K - k)) * bin_hz;
}

SpectralCoefficients dft(const GazeSequence& seq) {
  if (!seq.complete()) throw Error("dft: sequence has missing samples");
  const int K = static_cast<int>(seq.size());
  std::vector<double> in(seq.samples().begin(), seq.samples().end());
  std::vector<std::complex<double>> half(static_cast<std::size_t>(K / 2 + 1));
  fftw_plan plan = fftw_plan_dft_r2c_1d(K, in.data(), reinterpret_cast<fftw_complex*>(half.data()),
                                        FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);

  SpectralCoefficients out;
  out.bin_hz = seq.rate_hz() / K;
  out.coefficients.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k)
    out.coefficients[static_cast<std::size_t>(k)] =
        k <= K / 2 ? half[static_cast<std::size_t>(k)] : std::conj(half[static_cast<std::size_t>(K - k)]);
  return out;
}

bool in_band(double f, Band band, const BandCutoffs& cut) {
  switch (band) {
    case Band::Full: return true;
    case Band::Low: return f < cut.low_hz;
    case Band::Mid: return f >= cut.low_hz && f < cut.high_hz;
    case Band::High: return f >= cut.high_hz;
  }
  return false;
}

std::size_t band_bins(const SpectralCoefficients& c, Band band, const BandCutoffs& cut) {
  std::size_t n = 0;
  for (std::size_t k = 0; k < c.size(); ++k)
    if (in_band(c.frequency(k), band, cut)) ++n;
  return n;
}

double rmse_f(const SpectralCoefficients& X, const SpectralCoefficients& Xhat, Band band,
              const BandCutoffs& cut) {
  if (X.size() != Xhat.size()) throw Error("rmse_f: length mismatch");
  if (X.bin_hz != Xhat.bin_hz) throw Error("rmse_f: sampling rate mismatch");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < X.size(); ++k) {
    if (!in_band(X.frequency(k), band, cut)) continue;
    acc += std::norm(X.coefficients[k] - Xhat.coefficients[k]);
    ++n;
  }
  if (n == 0) throw Error("rmse_f: band contains no frequency bins");
  return std::sqrt(acc / static_cast<double>(n));
}

double rmse_f(const GazeSequence& x, const GazeSequence& xhat, Band band, const BandCutoffs& cut) {
  if (x.size() != xhat.size()) throw Error("rmse_f: length mismatch");
  if (x.rate_hz() != xhat.rate_hz()) throw Error("rmse_f: sampling rate mismatch");
  return rmse_f(dft(x), dft(xhat), band, cut);
}

// ---- report ---------------------------------------------------------------

const MetricValue& MetricsReport::at(std::size_t i) const {
  return const_cast<MetricsReport*>(this)->at(i);
}

MetricValue& MetricsReport::at(std::size_t i) {
  switch (i) {
    case 0: return mae;
    case 1: return mre;
    case 2: return rmse;
    case 3: return sim;
    case 4: return fsd;
    case 5: return rmse_f;
    case 6: return rmse_f_low;
    case 7: return rmse_f_high;
  }
  throw Error("MetricsReport: column out of range");
}

namespace {

MetricValue attempt(const std::function<double()>& f) {
  try {
    return {f(), {}};
  } catch (const std::exception& e) {
    return {std::nullopt, e.what()};
  }
}

}  // namespace

MetricsReport evaluate(const GazeSequence& x, const GazeSequence& xhat, const MissingMask& mask,
                       const BandCutoffs& cut) {
  MetricsReport r;
  r.n_imp = mask.size();
  r.mae = attempt([&] { return mae(x, xhat, mask); });
  r.mre = attempt([&] {
    const auto m = mre(x, xhat, mask);
    r.excluded_zero_count = m.excluded_zero_count;
    return m.value;
  });
  r.rmse = attempt([&] { return rmse(x, xhat, mask); });
  r.sim = attempt([&] { return sim(x, xhat, mask); });
  r.fsd = attempt([&] { return fsd(x, xhat, mask); });

  std::optional<SpectralCoefficients> X, Xhat;
  std::string spectral_error;
  try {
    if (x.size() != xhat.size()) throw Error("rmse_f: length mismatch");
    if (x.rate_hz() != xhat.rate_hz()) throw Error("rmse_f: sampling rate mismatch");
    X = dft(x);
    Xhat = dft(xhat);
  } catch (const std::exception& e) {
    spectral_error = e.what();
  }
  auto spectral = [&](Band b) -> MetricValue {
    if (!X) return {std::nullopt, spectral_error};
    return attempt([&] { return rmse_f(*X, *Xhat, b, cut); });
  };
  r.rmse_f = spectral(Band::Full);
  r.rmse_f_low = spectral(Band::Low);
  r.rmse_f_high = spectral(Band::High);
  return r;
}

namespace {

const std::array<const char*, 8> kKeys = {"mae",  "mre",    "rmse",       "sim",
                                          "fsd",  "rmse_f", "rmse_f_low", "rmse_f_high"};

}  // namespace

std::string to_json(const MetricsReport& r, const ReportLabels& labels) {
  nlohmann::ordered_json j;
  j["sequence"] = labels.sequence;
  j["method"] = labels.method;
  j["units"] = labels.units;
  for (std::size_t i = 0; i < kKeys.size(); ++i) {
    const auto& m = r.at(i);
    if (m.defined())
      j[kKeys[i]] = *m.value;
    else {
      j[kKeys[i]] = nullptr;
      j[std::string(kKeys[i]) + "_error"] = m.reason;
    }
  }
  j["n_imp"] = r.n_imp;
  j["excluded_zero_count"] = r.excluded_zero_count;
  return j.dump(2);
}

MetricsReport report_from_json(const std::string& text, ReportLabels* labels) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("report: ") + e.what());
  }
  MetricsReport r;
  for (std::size_t i = 0; i < kKeys.size(); ++i) {
    auto& m = r.at(i);
    const auto& v = j.at(kKeys[i]);
    if (v.is_null())
      m = {std::nullopt, j.value(std::string(kKeys[i]) + "_error", std::string("undefined"))};
    else
      m = {v.get<double>(), {}};
  }
  r.n_imp = j.at("n_imp").get<std::size_t>();
  r.excluded_zero_count = j.at("excluded_zero_count").get<std::size_t>();
  if (labels) {
    labels->sequence = j.value("sequence", std::string());
    labels->method = j.value("method", std::string());
    labels->units = j.value("units", std::string("deg"));
  }
  return r;
}

}  // namespace spem::metrics
