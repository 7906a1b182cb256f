#include "spem/resample.hpp"

#include <algorithm>
#include <cmath>

namespace spem {

namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

// 1000 / 30 * 30 is not exactly 1000 in binary floating point.
double snap_rate(double r) {
  const double nearest = std::round(r);
  return std::abs(r - nearest) <= 1e-9 * r ? nearest : r;
}

// One-sided three-point end slope, limited so the end interval stays monotone.
double end_slope(double h0, double h1, double d0, double d1) {
  double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
  if (sign(s) != sign(d0))
    s = 0.0;
  else if (sign(d0) != sign(d1) && std::abs(s) > std::abs(3.0 * d0))
    s = 3.0 * d0;
  return s;
}

}  // namespace

PchipSpline::PchipSpline(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  const std::size_t n = knots_.size();
  if (n != values_.size()) throw Error("pchip: abscissae and ordinates differ in length");
  if (n < 2) throw Error("pchip: needs at least 2 points");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(knots_[i]) || !std::isfinite(values_[i]))
      throw Error("pchip: non-finite input");
    if (i > 0 && !(knots_[i] > knots_[i - 1]))
      throw Error("pchip: abscissae must be strictly increasing");
  }

  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = knots_[i + 1] - knots_[i];
    delta[i] = (values_[i + 1] - values_[i]) / h[i];
  }

  slopes_.assign(n, 0.0);
  if (n == 2) {
    slopes_[0] = slopes_[1] = delta[0];
    return;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double a = delta[k - 1], b = delta[k];
    if (sign(a) * sign(b) <= 0) continue;  // extremum or flat: zero slope
    const double w1 = 2.0 * h[k] + h[k - 1];
    const double w2 = h[k] + 2.0 * h[k - 1];
    slopes_[k] = (w1 + w2) / (w1 / a + w2 / b);
  }
  slopes_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
  slopes_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

double PchipSpline::operator()(double x) const {
  if (!(x >= knots_.front() && x <= knots_.back()))
    throw Error("pchip: evaluation outside knot range (no extrapolation)");
  auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  std::size_t i = static_cast<std::size_t>(it - knots_.begin());
  i = i == 0 ? 0 : i - 1;
  if (i >= knots_.size() - 1) i = knots_.size() - 2;

  const double h = knots_[i + 1] - knots_[i];
  const double t = (x - knots_[i]) / h;
  if (t == 0.0) return values_[i];
  if (t == 1.0) return values_[i + 1];
  const double t2 = t * t, t3 = t2 * t;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  // Written around values_[i] so that flat segments come out bit-exact.
  return values_[i] + h01 * (values_[i + 1] - values_[i]) +
         h * (h10 * slopes_[i] + h11 * slopes_[i + 1]);
}

PchipSpline pchip_fit(std::span<const double> xs, std::span<const double> ys) {
  return PchipSpline({xs.begin(), xs.end()}, {ys.begin(), ys.end()});
}

double pchip_eval(const PchipSpline& sp, double x) { return sp(x); }

GazeSequence downsample(const GazeSequence& seq, std::size_t factor, DecimationMode mode) {
  if (factor < 1) throw Error("downsample: factor must be >= 1");
  const std::size_t n = seq.size();
  const std::size_t m = (n + factor - 1) / factor;
  std::vector<double> out(m, kMissing);
  for (std::size_t b = 0; b < m; ++b) {
    const std::size_t lo = b * factor, hi = std::min(n, lo + factor);
    std::size_t missing = 0;
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      if (is_missing(seq[i]))
        ++missing;
      else
        acc += seq[i];
    }
    const std::size_t width = hi - lo;
    if (2 * missing > width) continue;
    if (mode == DecimationMode::BlockMean)
      out[b] = acc / static_cast<double>(width - missing);
    else
      out[b] = seq[lo];  // may itself be missing
  }
  return GazeSequence(std::move(out), seq.rate_hz() / static_cast<double>(factor), seq.meta());
}

GazeSequence upsample(const GazeSequence& seq, std::size_t target_len, std::size_t factor) {
  if (!seq.complete()) throw Error("upsample: input still has missing values");
  const std::size_t n = seq.size();
  if (target_len == 0) throw Error("upsample: target length must be positive");
  if (factor == 0) factor = (target_len + n - 1) / n;
  if ((n - 1) * factor > target_len - 1)
    throw Error("upsample: coarse grid does not fit the target length");

  std::vector<double> out(target_len);
  if (n == 1) {
    std::fill(out.begin(), out.end(), seq[0]);
  } else {
    std::vector<double> xs(n), ys(seq.samples().begin(), seq.samples().end());
    for (std::size_t i = 0; i < n; ++i) xs[i] = static_cast<double>(i * factor);
    const PchipSpline sp(std::move(xs), std::move(ys));
    const std::size_t last = (n - 1) * factor;
    for (std::size_t j = 0; j < target_len; ++j)
      out[j] = j <= last ? sp(static_cast<double>(j)) : seq[n - 1];
    for (std::size_t i = 0; i < n; ++i) out[i * factor] = seq[i];
  }
  return GazeSequence(std::move(out), snap_rate(seq.rate_hz() * static_cast<double>(factor)), seq.meta());
}

}  // namespace spem
