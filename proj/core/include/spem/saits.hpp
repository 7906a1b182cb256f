#pragma once

// Self-attention imputation (SAITS): two diagonally masked self-attention
// blocks whose estimates are fused by a learned, mask-aware convex weight.

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "spem/autodiff.hpp"
#include "spem/blinks.hpp"
#include "spem/core.hpp"
#include "spem/imputers.hpp"

namespace spem {

// What the value channel holds at missing slots before the first block.
// Pchip also turns every block into a correction of its own input.
enum class InputFill { Zero, Pchip };

struct SaitsConfig {
  std::size_t seq_len = 500;
  int d_model = 256;
  int n_heads = 4;
  int d_ff = 512;
  int n_dmsa_blocks = 2;  // the architecture is fixed at two
  double dropout = 0.2;
  double lr = 4e-4;
  int epochs = 500;
  std::size_t batch = 32;
  InputFill input_fill = InputFill::Zero;
  double artificial_mask_rate = 0.15;
  double w_reconstruction = 1.0;
  double w_imputation = 1.0;
  std::size_t factor = 30;  // fine samples per coarse sample, for mask drawing

  static SaitsConfig paper();
  static SaitsConfig desk();
  void validate() const;
};

struct DmsaBlockParams {
  nn::Parameter w_in, b_in;              // 2 x d, 1 x d
  nn::Parameter wq, wk, wv, wo;          // d x d
  nn::Parameter ln1_g, ln1_b;            // 1 x d
  nn::Parameter w_ff1, b_ff1;            // d x f, 1 x f
  nn::Parameter w_ff2, b_ff2;            // f x d, 1 x d
  nn::Parameter ln2_g, ln2_b;            // 1 x d
  nn::Parameter w_out, b_out;            // d x 1, 1 x 1
};

struct SaitsModel {
  SaitsConfig config;
  std::array<DmsaBlockParams, 2> blocks;
  nn::Parameter w_eta, b_eta;  // (T + 1) x 1, 1 x 1

  static SaitsModel init(const SaitsConfig& cfg, std::uint64_t seed);

  // Stable order; pointers are invalidated if the model is moved.
  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
};

// Rows are sequences. values holds ground truth where observed_mask is 1 and
// zero elsewhere; artificial_mask marks observed slots hidden from the model.
struct MaskedBatch {
  nn::Matrix values;
  nn::Matrix observed_mask;
  nn::Matrix artificial_mask;

  void validate() const;
  nn::Matrix input_mask() const { return observed_mask - artificial_mask; }
};

// Scaled dot-product attention of a single head set; see attention_weights.
nn::Matrix dmsa_attention(const nn::Matrix& q, const nn::Matrix& k, const nn::Matrix& v,
                          int heads, bool diag_mask);

nn::Matrix sinusoidal_encoding(std::size_t length, int d_model);

struct BlockOutput {
  nn::Var estimate;   // T x 1
  nn::Var attention;  // heads*T x T
};

// Runs one block on a single sequence (x, m are T x 1). `grads` records
// parameters for differentiation; otherwise they enter as constants. With
// `residual` the projection is added to x, i.e. the block predicts a correction.
BlockOutput dmsa_block(nn::Tape& t, const DmsaBlockParams& p, nn::Var x, nn::Var m,
                       const nn::Matrix& pos_enc, int heads, double dropout, bool training,
                       std::mt19937_64* rng, bool grads, bool residual = false);

// eta = sigmoid([attention, mask] w + b); result (1 - eta) x1 + eta x2.
nn::Var weighted_combination(nn::Tape& t, nn::Var x1, nn::Var x2, nn::Var attention_mean,
                             nn::Var mask, nn::Var w_eta, nn::Var b_eta);

struct SaitsForward {
  nn::Var x1, x2, x3;
  nn::Var attention1, attention2;
};

SaitsForward saits_forward(nn::Tape& t, const SaitsModel& model, const nn::Matrix& x,
                           const nn::Matrix& m, bool training, std::mt19937_64* rng,
                           bool grads);

struct LossParts {
  double total = 0.0;
  double reconstruction = 0.0;
  double imputation = 0.0;
};

// Reconstruction MSE over input-observed slots plus imputation MSE over
// artificially masked slots, each averaged over its own slot count and
// summed over the three estimates. No artificial slots: imputation term 0.
LossParts saits_loss(const MaskedBatch& batch, const std::array<nn::Matrix, 3>& estimates,
                     double w_reconstruction = 1.0, double w_imputation = 1.0);

// Coarse-grid artificial mask with MNAR-shaped runs: blinks drawn from
// `stats` on the fine grid, then decimated with the majority rule. Falls back
// to independent uniform slots when `stats` is empty.
std::vector<std::size_t> coarse_artificial_mask(std::size_t seq_len, std::size_t factor,
                                                const blinks::BlinkStats& stats, double rate,
                                                std::uint64_t seed);

struct SaitsTrainResult {
  SaitsModel model;  // best-validation weights
  std::vector<double> train_loss;
  std::vector<double> val_loss;  // imputation MSE of the final estimate
  int best_epoch = 0;            // 1-based
};

// Trains on coarse, z-scored sequences. The validation set is fold `fold` of
// an n_folds partition (n_folds >= 2), or a 10% holdout when n_folds is 1.
SaitsTrainResult train_saits(const std::vector<GazeSequence>& sequences, const SaitsConfig& cfg,
                             const blinks::BlinkStats& stats, std::uint64_t seed, int fold = 0,
                             int n_folds = 10);

// Imputation on a z-scored coarse sequence of length config.seq_len.
ImputerOutput impute_saits(const SaitsModel& model, const GazeSequence& seq);

class SaitsImputer final : public Imputer {
 public:
  explicit SaitsImputer(SaitsModel model) : model_(std::move(model)) {}
  std::string name() const override { return "SAITS"; }
  ImputerOutput impute(const GazeSequence& seq) const override {
    return impute_saits(model_, seq);
  }
  const SaitsModel& model() const noexcept { return model_; }

 private:
  SaitsModel model_;
};

}  // namespace spem
