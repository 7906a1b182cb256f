#pragma once

// Minimal reverse-mode differentiation over dense matrices. A Tape records
// every operation of one forward pass together with a closure that
// propagates the output gradient to its inputs; Tape::backward replays the
// closures in reverse and accumulates into the bound Parameters.

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spem/core.hpp"

namespace spem::nn {

using Matrix = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;  // false for running statistics

  Parameter() = default;
  Parameter(std::string n, Matrix v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())),
        trainable(train) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Var {
 public:
  Var() = default;
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return id_ >= 0; }

 private:
  friend class Tape;
  explicit Var(int id) : id_(id) {}
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Var constant(Matrix value);
  Var parameter(Parameter& p);
  // Records an op result. `backward` is only kept when `needs_grad`.
  Var push(Matrix value, bool needs_grad, Backward backward);

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].value; }
  bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].needs_grad; }
  bool needs_grad(std::initializer_list<Var> vs) const;

  // Adds g into the gradient of v (no-op if v does not need gradients).
  void accumulate(Var v, const Matrix& g);

  // Seeds d(loss)/d(loss) = 1 for a 1x1 loss and runs the reverse sweep;
  // gradients of Parameter leaves are added to Parameter::grad.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// Differentiable leaf when `grads`, otherwise a constant copy. Only callers
// that own the parameter mutably may pass grads = true.
inline Var bind(Tape& t, const Parameter& p, bool grads) {
  return grads ? t.parameter(const_cast<Parameter&>(p)) : t.constant(p.value);
}

// ---- elementwise / dense ops ----------------------------------------------

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);  // Hadamard
Var scale(Tape& t, Var a, double s);
Var add_row(Tape& t, Var x, Var bias);  // bias 1 x C broadcast over rows
Var add_col(Tape& t, Var x, Var bias);  // bias R x 1 broadcast over columns
Var linear(Tape& t, Var x, Var w, Var b);  // x w + b
Var relu(Tape& t, Var x);
Var sigmoid(Tape& t, Var x);
Var concat_cols(Tape& t, Var a, Var b);
Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5);
Var dropout(Tape& t, Var x, double p, std::mt19937_64& rng);
// (1 - eta) * a + eta * b
Var lerp(Tape& t, Var a, Var b, Var eta);
// sum(weight .* (pred - target)^2) / denom as a 1x1 value; weight and target
// are treated as constants.
Var weighted_sse(Tape& t, Var pred, const Matrix& target, const Matrix& weight, double denom);
Var sum_scalars(Tape& t, const std::vector<Var>& xs);

// ---- attention ------------------------------------------------------------

// Row-stochastic attention weights of every head, stacked vertically
// (heads * T x T). Head h uses columns [h*dh, (h+1)*dh) of q and k and the
// scale 1/sqrt(dh). With diag_mask the logit of t attending to t is -inf.
Matrix attention_weights(const Matrix& q, const Matrix& k, int heads, bool diag_mask);
Var attention_probs(Tape& t, Var q, Var k, int heads, bool diag_mask);
// Per-head P_h v_h, concatenated back to T x d.
Var attention_apply(Tape& t, Var probs, Var v, int heads);
// Mean over heads of the stacked weights, T x T.
Var head_mean(Tape& t, Var probs, int heads);

// ---- 1-D convolution on batched channel-major layout ----------------------
// Activations are C x (B * L): sample b occupies columns [b*L, (b+1)*L).

struct ConvGeometry {
  int kernel = 9;
  int stride = 2;
  int pad = 4;

  int out_len(int in_len) const { return (in_len + 2 * pad - kernel) / stride + 1; }
};

// weight: Cout x (Cin * K), bias: Cout x 1.
Var conv1d(Tape& t, Var x, Var weight, Var bias, int batch, const ConvGeometry& g);
// Adjoint of conv1d: weight Cin x (Cout * K), output length out_len per sample.
Var conv_transpose1d(Tape& t, Var x, Var weight, Var bias, int batch, const ConvGeometry& g,
                     int out_len);

struct BatchNormState {
  Parameter* running_mean = nullptr;  // C x 1
  Parameter* running_var = nullptr;   // C x 1
  double momentum = 0.1;
  double eps = 1e-5;
};

// Per-channel (row) normalization over all columns. In training mode the
// batch statistics are used and the running estimates updated.
Var batch_norm(Tape& t, Var x, Var gamma, Var beta, const BatchNormState& st, bool training);

// ---- optimization ---------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg);

  void zero_grad();
  void step();
  double lr() const noexcept { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_, v_;
  AdamConfig cfg_;
  long step_ = 0;
};

// Multiplies the learning rate by `factor` once the monitored loss has not
// improved for more than `patience` consecutive epochs.
class ReduceOnPlateau {
 public:
  ReduceOnPlateau(double factor = 0.5, int patience = 20, double rel_threshold = 1e-4)
      : factor_(factor), patience_(patience), threshold_(rel_threshold) {}

  // Returns the learning rate to use next.
  double step(double loss, double lr);

 private:
  double factor_;
  int patience_;
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_ = 0;
};

// Glorot-uniform initialization.
Matrix glorot(int rows, int cols, int fan_in, int fan_out, std::mt19937_64& rng);

bool all_finite(const Matrix& m);

}  // namespace spem::nn
