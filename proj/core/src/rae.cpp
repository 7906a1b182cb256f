#include "spem/rae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "spem/resample.hpp"

namespace spem {

using nn::Matrix;
using nn::Parameter;
using nn::Tape;
using nn::Var;

RaeConfig RaeConfig::paper() { return {}; }

RaeConfig RaeConfig::desk() {
  RaeConfig c;
  c.filters = {8, 16, 32, 64};
  c.lr = 1e-3;
  c.max_epochs = 40;
  c.plateau_patience = 5;
  c.early_stop_patience = 12;
  c.folds = 1;
  c.batch = 8;
  c.crop_len = 1920;
  c.crops_per_sequence = 1;
  return c;
}

void RaeConfig::validate() const {
  if (filters.empty()) throw Error("RaeConfig: at least one encoder stage is required");
  for (int f : filters)
    if (f <= 0) throw Error("RaeConfig: filter counts must be positive");
  if (kernel < 1 || stride < 1 || padding < 0) throw Error("RaeConfig: invalid conv geometry");
  if (kernel != 2 * padding + 1)
    throw Error("RaeConfig: padding must be (kernel - 1) / 2 so strides divide lengths exactly");
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) throw Error("RaeConfig: lr and weight_decay must be nonnegative");
  if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) throw Error("RaeConfig: plateau_factor must be in (0, 1]");
  if (plateau_patience < 0 || early_stop_patience < 1) throw Error("RaeConfig: invalid patience");
  if (max_epochs < 1 || folds < 1 || batch < 1 || crops_per_sequence < 1 || factor < 1)
    throw Error("RaeConfig: counts must be positive");
  if (crop_len % length_quantum() != 0)
    throw Error("RaeConfig: crop_len must be a multiple of " + std::to_string(length_quantum()));
}

std::size_t RaeConfig::length_quantum() const {
  std::size_t q = 1;
  for (std::size_t i = 0; i < filters.size(); ++i) q *= static_cast<std::size_t>(stride);
  return q;
}

// ---- model ----------------------------------------------------------------

namespace {

RaeStage make_stage(const std::string& name, int rows, int cols, int fan_in, int fan_out,
                    int channels, std::mt19937_64& rng) {
  RaeStage s;
  s.w = Parameter(name + ".w", nn::glorot(rows, cols, fan_in, fan_out, rng));
  s.b = Parameter(name + ".b", Matrix::Zero(channels, 1));
  s.gamma = Parameter(name + ".gamma", Matrix::Ones(channels, 1));
  s.beta = Parameter(name + ".beta", Matrix::Zero(channels, 1));
  s.running_mean = Parameter(name + ".running_mean", Matrix::Zero(channels, 1), false);
  s.running_var = Parameter(name + ".running_var", Matrix::Ones(channels, 1), false);
  return s;
}

template <class Model, class Out>
void collect(Model& m, std::vector<Out>& out) {
  for (auto* stages : {&m.encoder, &m.decoder})
    for (auto& s : *stages)
      for (auto* p : {&s.w, &s.b, &s.gamma, &s.beta, &s.running_mean, &s.running_var})
        out.push_back(p);
  out.push_back(&m.out_w);
  out.push_back(&m.out_b);
}

}  // namespace

RaeModel RaeModel::init(const RaeConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  RaeModel m;
  m.config = cfg;
  const int K = cfg.kernel;
  int in = 1;
  for (std::size_t i = 0; i < cfg.filters.size(); ++i) {
    const int out = cfg.filters[i];
    m.encoder.push_back(make_stage("enc" + std::to_string(i), out, in * K, in * K, out * K, out, rng));
    in = out;
  }
  for (std::size_t j = 0; j + 1 < cfg.filters.size(); ++j) {
    const int cin = cfg.filters[j + 1], cout = cfg.filters[j];
    m.decoder.push_back(
        make_stage("dec" + std::to_string(j), cin, cout * K, cin * K, cout * K, cout, rng));
  }
  // Zero output layer: the untrained network is the identity through the
  // global residual, so training starts from plain upsampling.
  m.out_w = Parameter("out.w", Matrix::Zero(cfg.filters[0], K));
  m.out_b = Parameter("out.b", Matrix::Zero(1, 1));
  return m;
}

std::vector<Parameter*> RaeModel::parameters() {
  std::vector<Parameter*> out;
  collect(*this, out);
  return out;
}

std::vector<const Parameter*> RaeModel::parameters() const {
  std::vector<const Parameter*> out;
  collect(*this, out);
  return out;
}

Var rae_network(Tape& t, RaeModel& model, Var x, int batch, bool training, bool grads,
                double bn_momentum) {
  const auto& c = model.config;
  const nn::ConvGeometry g{c.kernel, c.stride, c.padding};
  const auto total = t.value(x).cols();
  if (t.value(x).rows() != 1 || total % batch != 0) throw Error("rae: expected a 1 x (B*L) input");
  const auto L = static_cast<std::size_t>(total / batch);
  if (L % c.length_quantum() != 0)
    throw Error("rae: length " + std::to_string(L) + " is not a multiple of " +
                std::to_string(c.length_quantum()));

  auto P = [&](const Parameter& p) { return nn::bind(t, p, grads); };
  auto bn_relu = [&](RaeStage& s, Var v) {
    nn::BatchNormState st{&s.running_mean, &s.running_var, bn_momentum};
    return nn::relu(t, nn::batch_norm(t, v, P(s.gamma), P(s.beta), st, training));
  };

  std::vector<Var> skips;
  std::vector<int> lens;
  Var h = x;
  int len = static_cast<int>(L);
  for (auto& s : model.encoder) {
    h = bn_relu(s, nn::conv1d(t, h, P(s.w), P(s.b), batch, g));
    len = g.out_len(len);
    skips.push_back(h);
    lens.push_back(len);
  }
  for (std::size_t j = model.decoder.size(); j-- > 0;) {
    auto& s = model.decoder[j];
    h = bn_relu(s, nn::conv_transpose1d(t, h, P(s.w), P(s.b), batch, g, lens[j]));
    h = nn::add(t, h, skips[j]);
  }
  h = nn::conv_transpose1d(t, h, P(model.out_w), P(model.out_b), batch, g, static_cast<int>(L));
  return nn::add(t, h, x);
}

GazeSequence degrade(const GazeSequence& seq, std::size_t factor) {
  if (!seq.complete()) throw Error("degrade: sequence has missing values");
  return upsample(downsample(seq, factor), seq.size(), factor).with_rate(seq.rate_hz());
}

// ---- inference ------------------------------------------------------------

namespace {

NormalizationParams robust_normalization(std::span<const double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double sd = std::sqrt(var);
  return {mean, sd > 1e-12 ? sd : 1.0};
}

}  // namespace

GazeSequence rae_forward(const RaeModel& model, const GazeSequence& seq) {
  if (!seq.complete()) throw Error("rae_forward: input has missing values");
  const std::size_t n = seq.size();
  const std::size_t q = model.config.length_quantum();
  const std::size_t padded = (n + q - 1) / q * q;
  const auto norm = robust_normalization(seq.samples());
  Matrix x(1, static_cast<Eigen::Index>(padded));
  for (std::size_t i = 0; i < padded; ++i)
    x(0, static_cast<Eigen::Index>(i)) = norm.apply(seq[std::min(i, n - 1)]);

  Tape t;
  // Inference never writes to the running statistics.
  Var y = rae_network(t, const_cast<RaeModel&>(model), t.constant(std::move(x)), 1, false, false);
  const Matrix& out = t.value(y);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = norm.invert(out(0, static_cast<Eigen::Index>(i)));
  if (!std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); }))
    throw Error("rae_forward: non-finite output");
  return seq.with_samples(std::move(v));
}

GazeSequence refine(const RaeModel& model, const GazeSequence& imputed_upsampled,
                    const MissingMask& mask, bool splice_gaps) {
  if (mask.length() != 0 && mask.length() != imputed_upsampled.size())
    throw Error("refine: mask length does not match the sequence");
  GazeSequence r = rae_forward(model, imputed_upsampled);
  if (!splice_gaps) return r;
  std::vector<double> v(imputed_upsampled.samples().begin(), imputed_upsampled.samples().end());
  for (auto i : mask.indices()) v[i] = r[i];
  return imputed_upsampled.with_samples(std::move(v));
}

// ---- training -------------------------------------------------------------

namespace {

struct Pair {
  std::vector<double> input;   // z-scored degraded sequence
  std::vector<double> target;  // original, same normalization
};

struct Window {
  std::size_t seq;
  std::size_t start;
};

// Stacks windows into 1 x (B*L) input, target, and weight rows. Positions past
// a sequence's end are edge-padded with weight 0.
void stack(const std::vector<Pair>& data, const std::vector<Window>& ws, std::size_t L, Matrix& x,
           Matrix& y, Matrix& w) {
  const auto B = static_cast<Eigen::Index>(ws.size());
  x.resize(1, B * static_cast<Eigen::Index>(L));
  y.resize(1, x.cols());
  w.resize(1, x.cols());
  for (std::size_t b = 0; b < ws.size(); ++b) {
    const auto& p = data[ws[b].seq];
    const std::size_t n = p.input.size();
    for (std::size_t i = 0; i < L; ++i) {
      const std::size_t src = ws[b].start + i;
      const auto col = static_cast<Eigen::Index>(b * L + i);
      const std::size_t k = std::min(src, n - 1);
      x(0, col) = p.input[k];
      y(0, col) = p.target[k];
      w(0, col) = src < n ? 1.0 : 0.0;
    }
  }
}

std::vector<std::pair<std::string, Matrix>> snapshot(const RaeModel& m) {
  std::vector<std::pair<std::string, Matrix>> out;
  for (const auto* p : m.parameters()) out.emplace_back(p->name, p->value);
  return out;
}

void restore(RaeModel& m, const std::vector<std::pair<std::string, Matrix>>& values) {
  auto ps = m.parameters();
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = values[i].second;
}

}  // namespace

RaeTrainResult train_rae(const std::vector<GazeSequence>& sequences, const RaeConfig& cfg,
                         std::uint64_t seed, int fold) {
  cfg.validate();
  if (sequences.size() < 2) throw Error("train_rae: need at least two sequences");
  const std::size_t q = cfg.length_quantum();

  std::vector<Pair> data;
  std::size_t min_len = std::numeric_limits<std::size_t>::max();
  for (const auto& s : sequences) {
    if (!s.complete())
      throw Error("train_rae: training sequence " + s.meta().id() + " contains missing values");
    const GazeSequence in = cfg.identity_degradation ? s : degrade(s, cfg.factor);
    const auto norm = robust_normalization(in.samples());
    Pair p;
    for (std::size_t i = 0; i < s.size(); ++i) {
      p.input.push_back(norm.apply(in[i]));
      p.target.push_back(norm.apply(s[i]));
    }
    min_len = std::min(min_len, s.size());
    data.push_back(std::move(p));
  }
  const bool whole = cfg.crop_len == 0 || cfg.crop_len > min_len;
  const std::size_t L = whole ? 0 : cfg.crop_len;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(mix_seed(seed, 0x80200000ULL + static_cast<std::uint64_t>(fold)));
  std::shuffle(order.begin(), order.end(), split_rng);
  const std::size_t n_val = std::max<std::size_t>(1, data.size() / 5);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  auto padded_len = [&](std::size_t i) { return (data[i].input.size() + q - 1) / q * q; };
  std::mt19937_64 rng(mix_seed(seed, 0xae0000ULL + static_cast<std::uint64_t>(fold)));
  auto random_start = [&](std::size_t i) {
    std::uniform_int_distribution<std::size_t> u(0, data[i].input.size() - L);
    return u(rng);
  };

  // Fixed validation windows.
  std::vector<Window> val_windows;
  for (auto i : val_idx)
    for (std::size_t c = 0; c < (whole ? 1 : 2); ++c) val_windows.push_back({i, whole ? 0 : random_start(i)});

  RaeTrainResult res;
  res.model = RaeModel::init(cfg, mix_seed(seed, 0xae1ULL));
  std::vector<Parameter*> trainable;
  for (auto* p : res.model.parameters())
    if (p->trainable) trainable.push_back(p);
  nn::Adam opt(trainable, nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  nn::ReduceOnPlateau plateau(cfg.plateau_factor, cfg.plateau_patience);

  auto run = [&](const std::vector<Window>& ws, bool training) {
    double sse = 0.0, count = 0.0;
    // Whole-sequence batches need a common padded length; group per sequence.
    const std::size_t step = whole ? 1 : cfg.batch;
    for (std::size_t b0 = 0; b0 < ws.size(); b0 += step) {
      const std::size_t b1 = std::min(ws.size(), b0 + step);
      std::vector<Window> chunk(ws.begin() + static_cast<std::ptrdiff_t>(b0),
                                ws.begin() + static_cast<std::ptrdiff_t>(b1));
      const std::size_t len = whole ? padded_len(chunk[0].seq) : L;
      Matrix x, y, w;
      stack(data, chunk, len, x, y, w);
      const double n = w.sum();
      Tape t;
      Var out = rae_network(t, res.model, t.constant(std::move(x)), static_cast<int>(chunk.size()),
                            training, training);
      Var loss = nn::weighted_sse(t, out, y, w, n);
      const double l = t.value(loss)(0, 0);
      if (!std::isfinite(l)) throw Error("train_rae: non-finite loss");
      sse += l * n;
      count += n;
      if (training) {
        opt.zero_grad();
        t.backward(loss);
        opt.step();
      }
    }
    return sse / count;
  };

  // With few optimizer steps per epoch the exponential running statistics lag
  // far behind the weights. Re-estimate them as a plain average over the
  // epoch's windows with the final weights.
  auto recalibrate = [&](const std::vector<Window>& ws) {
    const std::size_t step = whole ? 1 : cfg.batch;
    int k = 0;
    for (std::size_t b0 = 0; b0 < ws.size(); b0 += step, ++k) {
      const std::size_t b1 = std::min(ws.size(), b0 + step);
      std::vector<Window> chunk(ws.begin() + static_cast<std::ptrdiff_t>(b0),
                                ws.begin() + static_cast<std::ptrdiff_t>(b1));
      const std::size_t len = whole ? padded_len(chunk[0].seq) : L;
      Matrix x, y, w;
      stack(data, chunk, len, x, y, w);
      Tape t;
      rae_network(t, res.model, t.constant(std::move(x)), static_cast<int>(chunk.size()), true,
                  false, 1.0 / (k + 1));
    }
  };

  double best = std::numeric_limits<double>::infinity();
  auto best_values = snapshot(res.model);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<Window> ws;
    for (auto i : train_idx)
      for (std::size_t c = 0; c < (whole ? 1 : cfg.crops_per_sequence); ++c)
        ws.push_back({i, whole ? 0 : random_start(i)});
    std::shuffle(ws.begin(), ws.end(), rng);
    res.train_loss.push_back(run(ws, true));
    recalibrate(ws);
    const double val = run(val_windows, false);
    res.val_loss.push_back(val);
    res.epochs_run = epoch;
    if (val < best) {
      best = val;
      res.best_epoch = epoch;
      best_values = snapshot(res.model);
    }
    opt.set_lr(plateau.step(val, opt.lr()));
    if (epoch - res.best_epoch >= cfg.early_stop_patience) break;
  }
  restore(res.model, best_values);
  return res;
}

}  // namespace spem
