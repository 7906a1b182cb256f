#include "spem/autodiff.hpp"

#include <cmath>

namespace spem::nn {

// ---- Tape -----------------------------------------------------------------

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, {}, &p, p.trainable});
  return Var(static_cast<int>(nodes_.size()) - 1);
}

Var Tape::push(Matrix value, bool needs_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(static_cast<int>(nodes_.size()) - 1);
}

bool Tape::needs_grad(std::initializer_list<Var> vs) const {
  for (Var v : vs)
    if (needs_grad(v)) return true;
  return false;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id())];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1) throw Error("Tape::backward: loss must be a scalar");
  accumulate(loss, Matrix::Ones(1, 1));
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      const Matrix g = std::move(n.grad);
      n.grad = Matrix();
      n.backward(*this, g);
    }
  }
}

// ---- dense ops ------------------------------------------------------------

Var matmul(Tape& t, Var a, Var b) {
  if (t.value(a).cols() != t.value(b).rows()) throw Error("matmul: shape mismatch");
  return t.push(t.value(a) * t.value(b), t.needs_grad({a, b}), [a, b](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(a)) tp.accumulate(a, g * tp.value(b).transpose());
    if (tp.needs_grad(b)) tp.accumulate(b, tp.value(a).transpose() * g);
  });
}

namespace {

void same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(std::string(op) + ": shape mismatch");
}

}  // namespace

Var add(Tape& t, Var a, Var b) {
  same_shape(t.value(a), t.value(b), "add");
  return t.push(t.value(a) + t.value(b), t.needs_grad({a, b}), [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Tape& t, Var a, Var b) {
  same_shape(t.value(a), t.value(b), "sub");
  return t.push(t.value(a) - t.value(b), t.needs_grad({a, b}), [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    if (tp.needs_grad(b)) tp.accumulate(b, -g);
  });
}

Var mul(Tape& t, Var a, Var b) {
  same_shape(t.value(a), t.value(b), "mul");
  return t.push(t.value(a).cwiseProduct(t.value(b)), t.needs_grad({a, b}),
                [a, b](Tape& tp, const Matrix& g) {
                  if (tp.needs_grad(a)) tp.accumulate(a, g.cwiseProduct(tp.value(b)));
                  if (tp.needs_grad(b)) tp.accumulate(b, g.cwiseProduct(tp.value(a)));
                });
}

Var scale(Tape& t, Var a, double s) {
  return t.push(t.value(a) * s, t.needs_grad(a),
                [a, s](Tape& tp, const Matrix& g) { tp.accumulate(a, g * s); });
}

Var add_row(Tape& t, Var x, Var bias) {
  const Matrix& b = t.value(bias);
  if (b.rows() != 1 || b.cols() != t.value(x).cols()) throw Error("add_row: bias shape");
  Matrix out = t.value(x);
  out.rowwise() += b.row(0);
  return t.push(std::move(out), t.needs_grad({x, bias}), [x, bias](Tape& tp, const Matrix& g) {
    tp.accumulate(x, g);
    if (tp.needs_grad(bias)) tp.accumulate(bias, g.colwise().sum());
  });
}

Var add_col(Tape& t, Var x, Var bias) {
  const Matrix& b = t.value(bias);
  if (b.cols() != 1 || b.rows() != t.value(x).rows()) throw Error("add_col: bias shape");
  Matrix out = t.value(x);
  out.colwise() += b.col(0);
  return t.push(std::move(out), t.needs_grad({x, bias}), [x, bias](Tape& tp, const Matrix& g) {
    tp.accumulate(x, g);
    if (tp.needs_grad(bias)) tp.accumulate(bias, g.rowwise().sum());
  });
}

Var linear(Tape& t, Var x, Var w, Var b) { return add_row(t, matmul(t, x, w), b); }

Var relu(Tape& t, Var x) {
  return t.push(t.value(x).cwiseMax(0.0), t.needs_grad(x), [x](Tape& tp, const Matrix& g) {
    tp.accumulate(x, (tp.value(x).array() > 0.0).cast<double>().matrix().cwiseProduct(g));
  });
}

Var sigmoid(Tape& t, Var x) {
  Matrix y = (1.0 / (1.0 + (-t.value(x).array()).exp())).matrix();
  Matrix yc = y;
  return t.push(std::move(y), t.needs_grad(x), [x, yc = std::move(yc)](Tape& tp, const Matrix& g) {
    tp.accumulate(x, (g.array() * yc.array() * (1.0 - yc.array())).matrix());
  });
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.rows() != B.rows()) throw Error("concat_cols: row mismatch");
  Matrix out(A.rows(), A.cols() + B.cols());
  out << A, B;
  const Eigen::Index ca = A.cols(), cb = B.cols();
  return t.push(std::move(out), t.needs_grad({a, b}), [a, b, ca, cb](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.leftCols(ca));
    tp.accumulate(b, g.rightCols(cb));
  });
}

Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps) {
  const Matrix& X = t.value(x);
  const Eigen::Index C = X.cols();
  if (t.value(gamma).cols() != C || t.value(beta).cols() != C) throw Error("layer_norm: shape");
  const Eigen::VectorXd mean = X.rowwise().mean();
  Matrix xc = X.colwise() - mean;
  const Eigen::VectorXd inv =
      ((xc.array().square().rowwise().sum() / static_cast<double>(C)) + eps).rsqrt().matrix();
  Matrix xhat = xc.array().colwise() * inv.array();
  Matrix out = (xhat.array().rowwise() * t.value(gamma).row(0).array()).matrix();
  out.rowwise() += t.value(beta).row(0);
  return t.push(std::move(out), t.needs_grad({x, gamma, beta}),
                [x, gamma, beta, xhat = std::move(xhat), inv, C](Tape& tp, const Matrix& g) {
                  if (tp.needs_grad(gamma))
                    tp.accumulate(gamma, (g.array() * xhat.array()).colwise().sum().matrix());
                  if (tp.needs_grad(beta)) tp.accumulate(beta, g.colwise().sum());
                  if (tp.needs_grad(x)) {
                    const Matrix dxhat = (g.array().rowwise() * tp.value(gamma).row(0).array()).matrix();
                    const Eigen::VectorXd s1 = dxhat.rowwise().sum();
                    const Eigen::VectorXd s2 = (dxhat.array() * xhat.array()).rowwise().sum();
                    Matrix dx = (dxhat * static_cast<double>(C)).colwise() - s1;
                    dx -= (xhat.array().colwise() * s2.array()).matrix();
                    dx = (dx.array().colwise() * (inv.array() / static_cast<double>(C))).matrix();
                    tp.accumulate(x, dx);
                  }
                });
}

Var dropout(Tape& t, Var x, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw Error("dropout: p must be < 1");
  const Matrix& X = t.value(x);
  Matrix keep(X.rows(), X.cols());
  std::bernoulli_distribution coin(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i) keep(i, j) = coin(rng) ? s : 0.0;
  Matrix out = X.cwiseProduct(keep);
  return t.push(std::move(out), t.needs_grad(x), [x, keep = std::move(keep)](Tape& tp, const Matrix& g) {
    tp.accumulate(x, g.cwiseProduct(keep));
  });
}

Var lerp(Tape& t, Var a, Var b, Var eta) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  const Matrix& E = t.value(eta);
  same_shape(A, B, "lerp");
  same_shape(A, E, "lerp");
  Matrix out = A + E.cwiseProduct(B - A);
  return t.push(std::move(out), t.needs_grad({a, b, eta}), [a, b, eta](Tape& tp, const Matrix& g) {
    const Matrix& E = tp.value(eta);
    if (tp.needs_grad(a)) tp.accumulate(a, g.cwiseProduct((1.0 - E.array()).matrix()));
    if (tp.needs_grad(b)) tp.accumulate(b, g.cwiseProduct(E));
    if (tp.needs_grad(eta)) tp.accumulate(eta, g.cwiseProduct(tp.value(b) - tp.value(a)));
  });
}

Var weighted_sse(Tape& t, Var pred, const Matrix& target, const Matrix& weight, double denom) {
  const Matrix& P = t.value(pred);
  same_shape(P, target, "weighted_sse");
  same_shape(P, weight, "weighted_sse");
  Matrix out(1, 1);
  if (denom <= 0.0) {
    out(0, 0) = 0.0;
    return t.push(std::move(out), false, {});
  }
  Matrix diff = P - target;
  out(0, 0) = (weight.array() * diff.array().square()).sum() / denom;
  Matrix dfac = (2.0 / denom) * weight.cwiseProduct(diff);
  return t.push(std::move(out), t.needs_grad(pred), [pred, dfac = std::move(dfac)](Tape& tp, const Matrix& g) {
    tp.accumulate(pred, dfac * g(0, 0));
  });
}

Var sum_scalars(Tape& t, const std::vector<Var>& xs) {
  Matrix out = Matrix::Zero(1, 1);
  bool ng = false;
  for (Var v : xs) {
    if (t.value(v).size() != 1) throw Error("sum_scalars: non-scalar input");
    out(0, 0) += t.value(v)(0, 0);
    ng = ng || t.needs_grad(v);
  }
  return t.push(std::move(out), ng, [xs](Tape& tp, const Matrix& g) {
    for (Var v : xs) tp.accumulate(v, g);
  });
}

// ---- attention ------------------------------------------------------------

Matrix attention_weights(const Matrix& q, const Matrix& k, int heads, bool diag_mask) {
  if (q.cols() != k.cols() || q.cols() % heads != 0) throw Error("attention: shape mismatch");
  const Eigen::Index T = q.rows(), S = k.rows();
  if (diag_mask && T != S) throw Error("attention: diagonal mask needs square attention");
  if (diag_mask && T < 2) throw Error("attention: diagonal mask needs at least 2 positions");
  const Eigen::Index dh = q.cols() / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix P(T * heads, S);
  for (int h = 0; h < heads; ++h) {
    auto blk = P.middleRows(h * T, T);
    blk.noalias() = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * sc;
    if (diag_mask)
      for (Eigen::Index i = 0; i < T; ++i) blk(i, i) = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < T; ++i) {
      auto row = blk.row(i);
      const double mx = row.maxCoeff();
      row = (row.array() - mx).exp().matrix();
      row /= row.sum();
    }
  }
  return P;
}

Var attention_probs(Tape& t, Var q, Var k, int heads, bool diag_mask) {
  Matrix P = attention_weights(t.value(q), t.value(k), heads, diag_mask);
  Matrix Pc = P;
  return t.push(std::move(P), t.needs_grad({q, k}), [q, k, heads, Pc = std::move(Pc)](Tape& tp, const Matrix& g) {
    const Matrix& Q = tp.value(q);
    const Matrix& K = tp.value(k);
    const Eigen::Index T = Q.rows(), dh = Q.cols() / heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
    Matrix dQ = Matrix::Zero(Q.rows(), Q.cols());
    Matrix dK = Matrix::Zero(K.rows(), K.cols());
    for (int h = 0; h < heads; ++h) {
      const auto Ph = Pc.middleRows(h * T, T);
      const auto Gh = g.middleRows(h * T, T);
      const Eigen::VectorXd rs = (Ph.array() * Gh.array()).rowwise().sum();
      const Matrix dS = (Ph.array() * (Gh.array().colwise() - rs.array())).matrix() * sc;
      dQ.middleCols(h * dh, dh).noalias() += dS * K.middleCols(h * dh, dh);
      dK.middleCols(h * dh, dh).noalias() += dS.transpose() * Q.middleCols(h * dh, dh);
    }
    tp.accumulate(q, dQ);
    tp.accumulate(k, dK);
  });
}

Var attention_apply(Tape& t, Var probs, Var v, int heads) {
  const Matrix& P = t.value(probs);
  const Matrix& V = t.value(v);
  const Eigen::Index T = P.rows() / heads, dh = V.cols() / heads;
  if (P.cols() != V.rows() || V.cols() % heads != 0) throw Error("attention_apply: shape");
  Matrix out(T, V.cols());
  for (int h = 0; h < heads; ++h)
    out.middleCols(h * dh, dh).noalias() = P.middleRows(h * T, T) * V.middleCols(h * dh, dh);
  return t.push(std::move(out), t.needs_grad({probs, v}), [probs, v, heads, T, dh](Tape& tp, const Matrix& g) {
    const Matrix& P = tp.value(probs);
    const Matrix& V = tp.value(v);
    if (tp.needs_grad(probs)) {
      Matrix dP(P.rows(), P.cols());
      for (int h = 0; h < heads; ++h)
        dP.middleRows(h * T, T).noalias() = g.middleCols(h * dh, dh) * V.middleCols(h * dh, dh).transpose();
      tp.accumulate(probs, dP);
    }
    if (tp.needs_grad(v)) {
      Matrix dV = Matrix::Zero(V.rows(), V.cols());
      for (int h = 0; h < heads; ++h)
        dV.middleCols(h * dh, dh).noalias() = P.middleRows(h * T, T).transpose() * g.middleCols(h * dh, dh);
      tp.accumulate(v, dV);
    }
  });
}

Var head_mean(Tape& t, Var probs, int heads) {
  const Matrix& P = t.value(probs);
  const Eigen::Index T = P.rows() / heads;
  Matrix out = Matrix::Zero(T, P.cols());
  for (int h = 0; h < heads; ++h) out += P.middleRows(h * T, T);
  out /= static_cast<double>(heads);
  return t.push(std::move(out), t.needs_grad(probs), [probs, heads, T](Tape& tp, const Matrix& g) {
    Matrix d(T * heads, g.cols());
    for (int h = 0; h < heads; ++h) d.middleRows(h * T, T) = g / static_cast<double>(heads);
    tp.accumulate(probs, d);
  });
}

// ---- convolution ----------------------------------------------------------

namespace {

// cols(c*K + k, j) = x(c, base + j*s + k - p), zero outside [0, in_len).
void im2col(const Matrix& x, Eigen::Index base, int in_len, int out_positions, const ConvGeometry& g,
            Matrix& cols) {
  const Eigen::Index C = x.rows();
  cols.setZero(C * g.kernel, out_positions);
  for (Eigen::Index c = 0; c < C; ++c)
    for (int k = 0; k < g.kernel; ++k) {
      const Eigen::Index r = c * g.kernel + k;
      for (int j = 0; j < out_positions; ++j) {
        const int pos = j * g.stride + k - g.pad;
        if (pos >= 0 && pos < in_len) cols(r, j) = x(c, base + pos);
      }
    }
}

// Adjoint of im2col: y(c, base + j*s + k - p) += cols(c*K + k, j).
void col2im(const Matrix& cols, Eigen::Index base, int len, const ConvGeometry& g, Matrix& y) {
  const Eigen::Index C = cols.rows() / g.kernel;
  const auto positions = static_cast<int>(cols.cols());
  for (Eigen::Index c = 0; c < C; ++c)
    for (int k = 0; k < g.kernel; ++k) {
      const Eigen::Index r = c * g.kernel + k;
      for (int j = 0; j < positions; ++j) {
        const int pos = j * g.stride + k - g.pad;
        if (pos >= 0 && pos < len) y(c, base + pos) += cols(r, j);
      }
    }
}

}  // namespace

Var conv1d(Tape& t, Var x, Var weight, Var bias, int batch, const ConvGeometry& g) {
  const Matrix& X = t.value(x);
  const Matrix& W = t.value(weight);
  if (X.cols() % batch != 0) throw Error("conv1d: columns not divisible by batch");
  const int Lin = static_cast<int>(X.cols() / batch);
  const int Lout = g.out_len(Lin);
  if (Lout <= 0) throw Error("conv1d: input shorter than kernel");
  if (W.cols() != X.rows() * g.kernel) throw Error("conv1d: weight shape");
  if (t.value(bias).rows() != W.rows()) throw Error("conv1d: bias shape");
  Matrix out(W.rows(), static_cast<Eigen::Index>(batch) * Lout);
  Matrix cols;
  for (int b = 0; b < batch; ++b) {
    im2col(X, static_cast<Eigen::Index>(b) * Lin, Lin, Lout, g, cols);
    out.middleCols(static_cast<Eigen::Index>(b) * Lout, Lout).noalias() = W * cols;
  }
  out.colwise() += t.value(bias).col(0);
  return t.push(std::move(out), t.needs_grad({x, weight, bias}),
                [x, weight, bias, batch, g, Lin, Lout](Tape& tp, const Matrix& gr) {
                  const Matrix& X = tp.value(x);
                  const Matrix& W = tp.value(weight);
                  if (tp.needs_grad(bias)) tp.accumulate(bias, gr.rowwise().sum());
                  Matrix dW = Matrix::Zero(W.rows(), W.cols());
                  Matrix dX;
                  const bool want_x = tp.needs_grad(x);
                  if (want_x) dX = Matrix::Zero(X.rows(), X.cols());
                  Matrix cols;
                  for (int b = 0; b < batch; ++b) {
                    const auto gb = gr.middleCols(static_cast<Eigen::Index>(b) * Lout, Lout);
                    if (tp.needs_grad(weight)) {
                      im2col(X, static_cast<Eigen::Index>(b) * Lin, Lin, Lout, g, cols);
                      dW.noalias() += gb * cols.transpose();
                    }
                    if (want_x) {
                      const Matrix dcols = W.transpose() * gb;
                      col2im(dcols, static_cast<Eigen::Index>(b) * Lin, Lin, g, dX);
                    }
                  }
                  tp.accumulate(weight, dW);
                  if (want_x) tp.accumulate(x, dX);
                });
}

Var conv_transpose1d(Tape& t, Var x, Var weight, Var bias, int batch, const ConvGeometry& g,
                     int out_len) {
  const Matrix& X = t.value(x);
  const Matrix& W = t.value(weight);
  if (X.cols() % batch != 0) throw Error("conv_transpose1d: columns not divisible by batch");
  const int Lin = static_cast<int>(X.cols() / batch);
  if (g.out_len(out_len) != Lin) throw Error("conv_transpose1d: output length inconsistent with geometry");
  if (W.rows() != X.rows() || W.cols() % g.kernel != 0) throw Error("conv_transpose1d: weight shape");
  const Eigen::Index Cout = W.cols() / g.kernel;
  if (t.value(bias).rows() != Cout) throw Error("conv_transpose1d: bias shape");
  Matrix out = Matrix::Zero(Cout, static_cast<Eigen::Index>(batch) * out_len);
  for (int b = 0; b < batch; ++b) {
    const Matrix cols = W.transpose() * X.middleCols(static_cast<Eigen::Index>(b) * Lin, Lin);
    col2im(cols, static_cast<Eigen::Index>(b) * out_len, out_len, g, out);
  }
  out.colwise() += t.value(bias).col(0);
  return t.push(std::move(out), t.needs_grad({x, weight, bias}),
                [x, weight, bias, batch, g, Lin, out_len](Tape& tp, const Matrix& gr) {
                  const Matrix& X = tp.value(x);
                  const Matrix& W = tp.value(weight);
                  if (tp.needs_grad(bias)) tp.accumulate(bias, gr.rowwise().sum());
                  Matrix dW = Matrix::Zero(W.rows(), W.cols());
                  Matrix dX;
                  const bool want_x = tp.needs_grad(x);
                  if (want_x) dX.resize(X.rows(), X.cols());
                  Matrix cols;
                  for (int b = 0; b < batch; ++b) {
                    im2col(gr, static_cast<Eigen::Index>(b) * out_len, out_len, Lin, g, cols);
                    const auto xb = X.middleCols(static_cast<Eigen::Index>(b) * Lin, Lin);
                    if (tp.needs_grad(weight)) dW.noalias() += xb * cols.transpose();
                    if (want_x) dX.middleCols(static_cast<Eigen::Index>(b) * Lin, Lin).noalias() = W * cols;
                  }
                  tp.accumulate(weight, dW);
                  if (want_x) tp.accumulate(x, dX);
                });
}

Var batch_norm(Tape& t, Var x, Var gamma, Var beta, const BatchNormState& st, bool training) {
  const Matrix& X = t.value(x);
  const Eigen::Index C = X.rows();
  const double n = static_cast<double>(X.cols());
  if (t.value(gamma).rows() != C || t.value(beta).rows() != C) throw Error("batch_norm: shape");
  Eigen::VectorXd mean, var;
  if (training) {
    if (X.cols() < 2) throw Error("batch_norm: needs at least 2 values per channel");
    mean = X.rowwise().mean();
    var = (X.colwise() - mean).array().square().rowwise().sum().matrix() / n;
    const double m = st.momentum;
    st.running_mean->value = (1.0 - m) * st.running_mean->value + m * mean;
    st.running_var->value = (1.0 - m) * st.running_var->value + m * var * (n / (n - 1.0));
  } else {
    mean = st.running_mean->value.col(0);
    var = st.running_var->value.col(0);
  }
  const Eigen::VectorXd inv = (var.array() + st.eps).rsqrt().matrix();
  Matrix xhat = ((X.colwise() - mean).array().colwise() * inv.array()).matrix();
  Matrix out = (xhat.array().colwise() * t.value(gamma).col(0).array()).matrix();
  out.colwise() += t.value(beta).col(0);
  return t.push(std::move(out), t.needs_grad({x, gamma, beta}),
                [x, gamma, beta, xhat = std::move(xhat), inv, n, training](Tape& tp, const Matrix& g) {
                  if (tp.needs_grad(gamma))
                    tp.accumulate(gamma, (g.array() * xhat.array()).rowwise().sum().matrix());
                  if (tp.needs_grad(beta)) tp.accumulate(beta, g.rowwise().sum());
                  if (!tp.needs_grad(x)) return;
                  const Eigen::VectorXd gam = tp.value(gamma).col(0);
                  const Matrix dxhat = (g.array().colwise() * gam.array()).matrix();
                  if (!training) {
                    tp.accumulate(x, (dxhat.array().colwise() * inv.array()).matrix());
                    return;
                  }
                  const Eigen::VectorXd s1 = dxhat.rowwise().sum();
                  const Eigen::VectorXd s2 = (dxhat.array() * xhat.array()).rowwise().sum();
                  Matrix dx = (dxhat * n).colwise() - s1;
                  dx -= (xhat.array().colwise() * s2.array()).matrix();
                  dx = (dx.array().colwise() * (inv.array() / n)).matrix();
                  tp.accumulate(x, dx);
                });
}

// ---- Adam -----------------------------------------------------------------

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void Adam::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (!p.trainable) continue;
    Matrix g = p.grad;
    if (cfg_.weight_decay != 0.0) g += cfg_.weight_decay * p.value;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    if (cfg_.lr == 0.0) continue;
    p.value.array() -= cfg_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
  }
}

double ReduceOnPlateau::step(double loss, double lr) {
  if (loss < best_ * (1.0 - threshold_)) {
    best_ = loss;
    bad_ = 0;
    return lr;
  }
  if (++bad_ > patience_) {
    bad_ = 0;
    return lr * factor_;
  }
  return lr;
}

Matrix glorot(int rows, int cols, int fan_in, int fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
  return m;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace spem::nn
