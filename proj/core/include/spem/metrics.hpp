#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spem/core.hpp"

namespace spem::metrics {

// Time-domain scores over the imputed positions of `mask`. `x` is ground
// truth, `xhat` the reconstruction. All throw spem::Error when undefined.
double mae(const GazeSequence& x, const GazeSequence& xhat, const MissingMask& mask);

struct MreResult {
  double value;
  std::size_t excluded_zero_count;  // positions with x_i == 0, left out
};
MreResult mre(const GazeSequence& x, const GazeSequence& xhat, const MissingMask& mask);

double rmse(const GazeSequence& x, const GazeSequence& xhat, const MissingMask& mask);
double sim(const GazeSequence& x, const GazeSequence& xhat, const MissingMask& mask);
double fsd(const GazeSequence& x, const GazeSequence& xhat, const MissingMask& mask);

struct SpectralCoefficients {
  std::vector<std::complex<double>> coefficients;  // X_k, k = 0..K-1
  double bin_hz = 0.0;                             // rate / K

  std::size_t size() const noexcept { return coefficients.size(); }
  // Center frequency of bin k folded onto [0, rate/2].
  double frequency(std::size_t k) const;
};

// Unnormalized forward DFT, X_k = sum_n x_n exp(-2 pi i k n / K).
SpectralCoefficients dft(const GazeSequence& seq);

enum class Band { Full, Low, Mid, High };

struct BandCutoffs {
  double low_hz = 1.0;   // Low: f < low_hz
  double high_hz = 5.0;  // High: f >= high_hz; Mid is what lies between
};

bool in_band(double freq_hz, Band band, const BandCutoffs& cut = {});
std::size_t band_bins(const SpectralCoefficients& c, Band band, const BandCutoffs& cut = {});

double rmse_f(const GazeSequence& x, const GazeSequence& xhat, Band band = Band::Full,
              const BandCutoffs& cut = {});
// Same, from precomputed spectra.
double rmse_f(const SpectralCoefficients& X, const SpectralCoefficients& Xhat, Band band,
              const BandCutoffs& cut = {});

struct MetricValue {
  std::optional<double> value;
  std::string reason;  // why the metric is undefined, empty otherwise

  bool defined() const noexcept { return value.has_value(); }
};

struct MetricsReport {
  static constexpr std::array<std::string_view, 8> kColumns = {
      "MAE", "MRE", "RMSE", "Sim", "FSD", "RMSE_F", "RMSE_F_Low", "RMSE_F_High"};

  MetricValue mae, mre, rmse, sim, fsd, rmse_f, rmse_f_low, rmse_f_high;
  std::size_t n_imp = 0;
  std::size_t excluded_zero_count = 0;

  // Column i in kColumns order.
  const MetricValue& at(std::size_t i) const;
  MetricValue& at(std::size_t i);
};

MetricsReport evaluate(const GazeSequence& x, const GazeSequence& xhat, const MissingMask& mask,
                       const BandCutoffs& cut = {});

// Report JSON: one object with the eight metrics (null when undefined, plus
// a "<name>_error" reason), n_imp, excluded_zero_count and free-form labels.
struct ReportLabels {
  std::string sequence;
  std::string method;
  std::string units = "deg";
};

std::string to_json(const MetricsReport& r, const ReportLabels& labels = {});
MetricsReport report_from_json(const std::string& text, ReportLabels* labels = nullptr);

}  // namespace spem::metrics
