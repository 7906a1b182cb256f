#include <doctest.h>

#include <random>

#include "gradcheck.hpp"

using namespace spem::nn;

namespace {

Matrix randn(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = n(rng);
  return m;
}

}  // namespace

TEST_CASE("dense ops differentiate correctly") {
  std::mt19937_64 rng(1);
  Parameter a("a", randn(5, 4, rng)), w("w", randn(4, 3, rng)), b("b", randn(1, 3, rng)),
      g("g", randn(1, 3, rng)), be("be", randn(1, 3, rng));
  const Matrix target = randn(5, 3, rng), weight = Matrix::Ones(5, 3);
  auto loss = [&](bool grads) {
    Tape t;
    Var x = t.parameter(a);
    Var h = linear(t, x, t.parameter(w), t.parameter(b));
    Var n = layer_norm(t, h, t.parameter(g), t.parameter(be));
    Var s = sigmoid(t, n);
    Var r = relu(t, sub(t, h, scale(t, s, 0.5)));
    Var e = lerp(t, r, n, s);
    Var l = weighted_sse(t, mul(t, e, add(t, e, h)), target, weight, 15.0);
    if (grads) t.backward(l);
    return t.value(l)(0, 0);
  };
  CHECK(worst_gradient_error({&a, &w, &b, &g, &be}, loss) < 1e-5);
}

TEST_CASE("attention differentiates correctly and masks the diagonal") {
  std::mt19937_64 rng(2);
  Parameter q("q", randn(6, 4, rng)), k("k", randn(6, 4, rng)), v("v", randn(6, 4, rng));
  const Matrix target = randn(6, 4, rng), target_mean = randn(6, 6, rng);
  auto loss = [&](bool grads) {
    Tape t;
    Var p = attention_probs(t, t.parameter(q), t.parameter(k), 2, true);
    Var o = attention_apply(t, p, t.parameter(v), 2);
    Var hm = head_mean(t, p, 2);
    Var l = add(t, weighted_sse(t, o, target, Matrix::Ones(6, 4), 1.0),
                weighted_sse(t, hm, target_mean, Matrix::Ones(6, 6), 1.0));
    if (grads) t.backward(l);
    return t.value(l)(0, 0);
  };
  CHECK(worst_gradient_error({&q, &k, &v}, loss) < 1e-5);

  const Matrix p = attention_weights(q.value, k.value, 2, true);
  for (int h = 0; h < 2; ++h)
    for (int i = 0; i < 6; ++i) CHECK(p(h * 6 + i, i) == 0.0);
}

TEST_CASE("convolutions and batch norm differentiate correctly") {
  std::mt19937_64 rng(3);
  const ConvGeometry g{5, 2, 2};
  const int batch = 2, len = 12, cin = 2, cout = 3;
  Parameter x("x", randn(cin, batch * len, rng));
  Parameter w("w", randn(cout, cin * g.kernel, rng)), b("b", randn(cout, 1, rng));
  Parameter wt("wt", randn(cout, cin * g.kernel, rng)), bt("bt", randn(cin, 1, rng));
  Parameter gam("gam", randn(cout, 1, rng)), bet("bet", randn(cout, 1, rng));
  Parameter rm("rm", Matrix::Zero(cout, 1), false), rv("rv", Matrix::Ones(cout, 1), false);
  const Matrix target = randn(cin, batch * len, rng);
  auto loss = [&](bool grads) {
    Tape t;
    Var h = conv1d(t, t.parameter(x), t.parameter(w), t.parameter(b), batch, g);
    Parameter rm_copy = rm, rv_copy = rv;  // keep running stats fixed across probes
    Var n = batch_norm(t, h, t.parameter(gam), t.parameter(bet), {&rm_copy, &rv_copy}, true);
    Var o = conv_transpose1d(t, n, t.parameter(wt), t.parameter(bt), batch, g, len);
    Var l = weighted_sse(t, o, target, Matrix::Ones(cin, batch * len), 1.0);
    if (grads) t.backward(l);
    return t.value(l)(0, 0);
  };
  CHECK(worst_gradient_error({&x, &w, &b, &wt, &bt, &gam, &bet}, loss) < 1e-5);
}

TEST_CASE("conv output lengths") {
  const ConvGeometry g{9, 2, 4};
  CHECK(g.out_len(16) == 8);
  CHECK(g.out_len(15008) == 7504);
}

TEST_CASE("Adam with zero learning rate leaves parameters alone") {
  std::mt19937_64 rng(4);
  Parameter p("p", randn(3, 3, rng));
  const Matrix before = p.value;
  Adam opt({&p}, {.lr = 0.0, .weight_decay = 1e-2});
  p.grad = randn(3, 3, rng);
  opt.step();
  CHECK(p.value == before);
}

TEST_CASE("Adam minimizes a quadratic") {
  Parameter p("p", Matrix::Constant(1, 2, 5.0));
  Adam opt({&p}, {.lr = 0.1});
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    p.grad = 2.0 * (p.value.array() - 1.0).matrix();
    opt.step();
  }
  CHECK(std::abs(p.value(0) - 1.0) < 1e-2);
}

TEST_CASE("plateau scheduler halves after patience is exceeded") {
  ReduceOnPlateau s(0.5, 2);
  double lr = 1.0;
  lr = s.step(1.0, lr);
  lr = s.step(1.0, lr);
  lr = s.step(1.0, lr);
  CHECK(lr == 1.0);
  lr = s.step(1.0, lr);
  CHECK(lr == 0.5);
  lr = s.step(0.5, lr);
  CHECK(lr == 0.5);
}
