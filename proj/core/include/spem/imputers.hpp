#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spem/core.hpp"

namespace spem {

// Every imputer returns a complete sequence whose observed samples are
// bit-identical to the input, plus the set of positions it filled.
struct ImputerOutput {
  GazeSequence sequence;
  MissingMask filled;
};

class Imputer {
 public:
  virtual ~Imputer() = default;
  virtual std::string name() const = 0;
  virtual ImputerOutput impute(const GazeSequence& seq) const = 0;
};

// Builds the output from `seq` with `values` substituted at missing positions.
ImputerOutput splice_missing(const GazeSequence& seq, const std::vector<double>& values);

// ---- PCHIP ----------------------------------------------------------------

// Interior gaps are PCHIP-interpolated through all observed samples; leading
// and trailing gaps hold the nearest observed value.
ImputerOutput impute_pchip(const GazeSequence& seq);

class PchipImputer final : public Imputer {
 public:
  std::string name() const override { return "PCHIP"; }
  ImputerOutput impute(const GazeSequence& seq) const override { return impute_pchip(seq); }
};

// ---- SSA ------------------------------------------------------------------

enum class ForecastBlend { Forward, Backward, Average };

struct SsaConfig {
  std::size_t window_L = 50;
  std::size_t rank_r = 0;             // 0: smallest rank capturing energy_threshold
  double energy_threshold = 0.995;
  ForecastBlend blend = ForecastBlend::Average;

  void validate(std::size_t series_len) const;
};

struct SsaDecomposition {
  std::vector<double> singular_values;       // descending
  Eigen::MatrixXd left_vectors;              // L x d, column i pairs with singular_values[i]
  std::vector<std::vector<double>> components;  // elementary reconstructions, length N each

  // Sum of the first r elementary reconstructions.
  std::vector<double> reconstruct(std::size_t r) const;
  std::size_t rank_for_energy(double fraction) const;
};

SsaDecomposition ssa_decompose(const GazeSequence& seq, std::size_t window_L);
SsaDecomposition ssa_decompose(const std::vector<double>& series, std::size_t window_L);

// Coefficients a_1..a_{L-1} of the linear recurrence
// y_n = sum_j a_j y_{n-L+j} spanned by the leading r left singular vectors.
std::vector<double> ssa_recurrence(const SsaDecomposition& d, std::size_t r);

// Extends `series` by `steps` values using SSA recurrent forecasting.
std::vector<double> ssa_forecast(const std::vector<double>& series, const SsaConfig& cfg,
                                 std::size_t steps);

ImputerOutput impute_ssa(const GazeSequence& seq, const SsaConfig& cfg = {});

class SsaImputer final : public Imputer {
 public:
  explicit SsaImputer(SsaConfig cfg = {}) : cfg_(cfg) {}
  std::string name() const override { return "SSA"; }
  ImputerOutput impute(const GazeSequence& seq) const override { return impute_ssa(seq, cfg_); }

 private:
  SsaConfig cfg_;
};

// ---- KNN ------------------------------------------------------------------

enum class KnnWeighting { Uniform, InverseDistance };

struct KnnConfig {
  std::size_t k = 5;
  std::size_t context = 10;  // samples on each side of a gap
  KnnWeighting weighting = KnnWeighting::Uniform;

  void validate() const;
};

// Exemplar matching: every window of every library sequence is scored by the
// Euclidean distance of its flanks to the gap's context; the k closest
// windows' interiors are averaged into the gap.
ImputerOutput impute_knn(const GazeSequence& seq, const std::vector<GazeSequence>& library,
                         const KnnConfig& cfg = {});

class KnnImputer final : public Imputer {
 public:
  KnnImputer(std::vector<GazeSequence> library, KnnConfig cfg = {})
      : library_(std::move(library)), cfg_(cfg) {}
  std::string name() const override { return "KNN"; }
  ImputerOutput impute(const GazeSequence& seq) const override {
    return impute_knn(seq, library_, cfg_);
  }

 private:
  std::vector<GazeSequence> library_;
  KnnConfig cfg_;
};

// ---- normalization wrapper -----------------------------------------------

// Runs `inner` on the per-sequence z-scored input and maps the fill back to
// the input's units. Observed samples are copied from the input, not
// round-tripped, so pass-through stays bit-exact.
class ZscoreImputer final : public Imputer {
 public:
  explicit ZscoreImputer(std::shared_ptr<const Imputer> inner) : inner_(std::move(inner)) {}
  std::string name() const override { return inner_->name(); }
  ImputerOutput impute(const GazeSequence& seq) const override;

 private:
  std::shared_ptr<const Imputer> inner_;
};

}  // namespace spem
