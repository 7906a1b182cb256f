#pragma once

// Refinement autoencoder: a 1-D convolutional U-Net-style encoder/decoder
// with additive skips that undoes the loss of a decimate/PCHIP round trip.

#include <cstdint>
#include <vector>

#include "spem/autodiff.hpp"
#include "spem/core.hpp"

namespace spem {

struct RaeConfig {
  std::vector<int> filters = {16, 32, 64, 128};  // one entry per encoder stage
  int kernel = 9;
  int stride = 2;
  int padding = 4;
  double lr = 1e-4;
  double weight_decay = 1e-5;
  double plateau_factor = 0.5;
  int plateau_patience = 20;
  int early_stop_patience = 50;
  int max_epochs = 100;
  int folds = 10;
  std::size_t batch = 16;
  std::size_t crop_len = 1920;  // training windows; 0 trains on whole sequences
  std::size_t crops_per_sequence = 1;
  std::size_t factor = 30;      // decimation the model learns to undo
  bool identity_degradation = false;  // control: input equals target

  static RaeConfig paper();
  static RaeConfig desk();
  void validate() const;
  // Lengths must be multiples of this for the skips to line up.
  std::size_t length_quantum() const;
};

struct RaeStage {
  nn::Parameter w, b;          // conv weights and bias
  nn::Parameter gamma, beta;   // batch-norm affine (C x 1)
  nn::Parameter running_mean, running_var;  // not trainable
};

struct RaeModel {
  RaeConfig config;
  std::vector<RaeStage> encoder;  // stage i: filters[i-1] -> filters[i]
  std::vector<RaeStage> decoder;  // mirrored; decoder[j] maps to encoder width j
  nn::Parameter out_w, out_b;     // final transposed conv to one channel

  static RaeModel init(const RaeConfig& cfg, std::uint64_t seed);
  std::vector<nn::Parameter*> parameters();  // all, including running stats
  std::vector<const nn::Parameter*> parameters() const;
};

// Network on a batch laid out as 1 x (B * L), L a multiple of the length
// quantum. In training mode batch statistics are used and running
// statistics updated.
// bn_momentum only matters in training mode, where the running statistics
// are updated.
nn::Var rae_network(nn::Tape& t, RaeModel& model, nn::Var x, int batch, bool training,
                    bool grads, double bn_momentum = 0.1);

// Degradation the model is trained to undo: decimate by `factor` and PCHIP
// back to the original length.
GazeSequence degrade(const GazeSequence& seq, std::size_t factor);

// Whole-sequence forward pass: per-sequence z-score, edge padding to the
// length quantum, network, crop, inverse z-score.
GazeSequence rae_forward(const RaeModel& model, const GazeSequence& seq);

// Refined sequence. With splice_gaps only mask positions take refined values.
GazeSequence refine(const RaeModel& model, const GazeSequence& imputed_upsampled,
                    const MissingMask& mask, bool splice_gaps = false);

struct RaeTrainResult {
  RaeModel model;  // best-validation weights
  std::vector<double> train_loss;
  std::vector<double> val_loss;  // z-scored MSE
  int best_epoch = 0;            // 1-based
  int epochs_run = 0;
};

// Trains on complete sequences with a seeded 80/20 train/validation split
// for `fold`.
RaeTrainResult train_rae(const std::vector<GazeSequence>& sequences, const RaeConfig& cfg,
                         std::uint64_t seed, int fold = 0);

}  // namespace spem
