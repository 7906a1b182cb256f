#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spem/core.hpp"

namespace spem {

// Shape-preserving piecewise cubic Hermite interpolant (Fritsch-Carlson
// slopes, as in the classic PCHIP routine).
class PchipSpline {
 public:
  PchipSpline(std::vector<double> knots, std::vector<double> values);

  double operator()(double x) const;  // throws outside [front, back]

  std::span<const double> knots() const noexcept { return knots_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> derivatives() const noexcept { return slopes_; }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<double> slopes_;
};

PchipSpline pchip_fit(std::span<const double> xs, std::span<const double> ys);
double pchip_eval(const PchipSpline& sp, double x);

enum class DecimationMode { BlockMean, Stride };

// Block decimation. A block is missing iff more than half of its samples are
// missing; otherwise it carries the mean of its observed samples (BlockMean)
// or its first sample (Stride). Output rate is rate / factor.
GazeSequence downsample(const GazeSequence& seq, std::size_t factor = 30,
                        DecimationMode mode = DecimationMode::BlockMean);

// Coarse sample i is placed at fine index i * factor and the PCHIP curve
// through those knots is sampled at every fine index. Fine samples past the
// last knot hold its value. `factor` = 0 derives ceil(target_len / size).
GazeSequence upsample(const GazeSequence& seq, std::size_t target_len, std::size_t factor = 0);

}  // namespace spem
