#include "spem/saits.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spem {

using nn::Matrix;
using nn::Parameter;
using nn::Tape;
using nn::Var;
using nn::bind;

SaitsConfig SaitsConfig::paper() { return {}; }

SaitsConfig SaitsConfig::desk() {
  SaitsConfig c;
  c.d_model = 32;
  c.n_heads = 2;
  c.d_ff = 64;
  c.dropout = 0.0;
  c.lr = 1e-3;
  c.epochs = 40;
  c.batch = 1;
  return c;
}

void SaitsConfig::validate() const {
  if (seq_len < 2) throw Error("SaitsConfig: seq_len must be at least 2");
  if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0)
    throw Error("SaitsConfig: d_model must be a positive multiple of n_heads");
  if (d_ff <= 0) throw Error("SaitsConfig: d_ff must be positive");
  if (n_dmsa_blocks != 2) throw Error("SaitsConfig: exactly two DMSA blocks are supported");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("SaitsConfig: dropout must be in [0, 1)");
  if (!(lr >= 0.0)) throw Error("SaitsConfig: lr must be nonnegative");
  if (epochs < 1) throw Error("SaitsConfig: epochs must be positive");
  if (batch < 1) throw Error("SaitsConfig: batch must be positive");
  if (!(artificial_mask_rate >= 0.0 && artificial_mask_rate < 1.0))
    throw Error("SaitsConfig: artificial_mask_rate must be in [0, 1)");
  if (w_reconstruction < 0.0 || w_imputation < 0.0)
    throw Error("SaitsConfig: loss weights must be nonnegative");
  if (factor < 1) throw Error("SaitsConfig: factor must be positive");
}

// ---- model ----------------------------------------------------------------

namespace {

DmsaBlockParams init_block(const SaitsConfig& c, std::mt19937_64& rng, const std::string& pre) {
  const int d = c.d_model, f = c.d_ff;
  DmsaBlockParams b;
  b.w_in = Parameter(pre + ".w_in", nn::glorot(2, d, 2, d, rng));
  b.b_in = Parameter(pre + ".b_in", Matrix::Zero(1, d));
  b.wq = Parameter(pre + ".wq", nn::glorot(d, d, d, d, rng));
  b.wk = Parameter(pre + ".wk", nn::glorot(d, d, d, d, rng));
  b.wv = Parameter(pre + ".wv", nn::glorot(d, d, d, d, rng));
  b.wo = Parameter(pre + ".wo", nn::glorot(d, d, d, d, rng));
  b.ln1_g = Parameter(pre + ".ln1_g", Matrix::Ones(1, d));
  b.ln1_b = Parameter(pre + ".ln1_b", Matrix::Zero(1, d));
  b.w_ff1 = Parameter(pre + ".w_ff1", nn::glorot(d, f, d, f, rng));
  b.b_ff1 = Parameter(pre + ".b_ff1", Matrix::Zero(1, f));
  b.w_ff2 = Parameter(pre + ".w_ff2", nn::glorot(f, d, f, d, rng));
  b.b_ff2 = Parameter(pre + ".b_ff2", Matrix::Zero(1, d));
  b.ln2_g = Parameter(pre + ".ln2_g", Matrix::Ones(1, d));
  b.ln2_b = Parameter(pre + ".ln2_b", Matrix::Zero(1, d));
  // Correction heads start at zero so the untrained model returns its input.
  b.w_out = Parameter(pre + ".w_out", c.input_fill == InputFill::Pchip
                                          ? Matrix::Zero(d, 1)
                                          : nn::glorot(d, 1, d, 1, rng));
  b.b_out = Parameter(pre + ".b_out", Matrix::Zero(1, 1));
  return b;
}

template <class Block, class Out>
void block_params(Block& b, std::vector<Out>& out) {
  for (auto* p : {&b.w_in, &b.b_in, &b.wq, &b.wk, &b.wv, &b.wo, &b.ln1_g, &b.ln1_b, &b.w_ff1,
                  &b.b_ff1, &b.w_ff2, &b.b_ff2, &b.ln2_g, &b.ln2_b, &b.w_out, &b.b_out})
    out.push_back(p);
}

}  // namespace

SaitsModel SaitsModel::init(const SaitsConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  SaitsModel m;
  m.config = cfg;
  m.blocks[0] = init_block(cfg, rng, "block1");
  m.blocks[1] = init_block(cfg, rng, "block2");
  const int T = static_cast<int>(cfg.seq_len);
  m.w_eta = Parameter("wcb.w", nn::glorot(T + 1, 1, T + 1, 1, rng));
  m.b_eta = Parameter("wcb.b", Matrix::Zero(1, 1));
  return m;
}

std::vector<Parameter*> SaitsModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& b : blocks) block_params(b, out);
  out.push_back(&w_eta);
  out.push_back(&b_eta);
  return out;
}

std::vector<const Parameter*> SaitsModel::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& b : blocks) block_params(b, out);
  out.push_back(&w_eta);
  out.push_back(&b_eta);
  return out;
}

void MaskedBatch::validate() const {
  if (values.rows() != observed_mask.rows() || values.cols() != observed_mask.cols() ||
      values.rows() != artificial_mask.rows() || values.cols() != artificial_mask.cols())
    throw Error("MaskedBatch: shape mismatch");
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double o = observed_mask(i), a = artificial_mask(i);
    if ((o != 0.0 && o != 1.0) || (a != 0.0 && a != 1.0))
      throw Error("MaskedBatch: masks must be 0/1 indicators");
    if (a > o) throw Error("MaskedBatch: artificial mask must be a subset of the observed mask");
    if (o == 0.0 && values(i) != 0.0) throw Error("MaskedBatch: missing slots must be zero-filled");
  }
}

// ---- building blocks ------------------------------------------------------

Matrix dmsa_attention(const Matrix& q, const Matrix& k, const Matrix& v, int heads,
                      bool diag_mask) {
  if (k.rows() != v.rows() || v.cols() % heads != 0) throw Error("dmsa_attention: shape mismatch");
  const Matrix P = nn::attention_weights(q, k, heads, diag_mask);
  const Eigen::Index T = q.rows(), dh = v.cols() / heads;
  Matrix out(T, v.cols());
  for (int h = 0; h < heads; ++h)
    out.middleCols(h * dh, dh) = P.middleRows(h * T, T) * v.middleCols(h * dh, dh);
  return out;
}

Matrix sinusoidal_encoding(std::size_t length, int d_model) {
  Matrix pe(static_cast<Eigen::Index>(length), d_model);
  for (std::size_t pos = 0; pos < length; ++pos)
    for (int i = 0; i < d_model; i += 2) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / d_model);
      pe(static_cast<Eigen::Index>(pos), i) = std::sin(angle);
      if (i + 1 < d_model) pe(static_cast<Eigen::Index>(pos), i + 1) = std::cos(angle);
    }
  return pe;
}

BlockOutput dmsa_block(Tape& t, const DmsaBlockParams& p, Var x, Var m, const Matrix& pos_enc,
                       int heads, double dropout, bool training, std::mt19937_64* rng,
                       bool grads, bool residual) {
  auto P = [&](const Parameter& q) { return bind(t, q, grads); };
  auto drop = [&](Var v) {
    return training && dropout > 0.0 ? nn::dropout(t, v, dropout, *rng) : v;
  };
  if (t.value(x).rows() != pos_enc.rows()) throw Error("dmsa_block: sequence length mismatch");

  Var h = nn::linear(t, nn::concat_cols(t, x, m), P(p.w_in), P(p.b_in));
  h = drop(nn::add(t, h, t.constant(pos_enc)));

  Var q = nn::matmul(t, h, P(p.wq));
  Var k = nn::matmul(t, h, P(p.wk));
  Var v = nn::matmul(t, h, P(p.wv));
  Var att = nn::attention_probs(t, q, k, heads, true);
  Var o = nn::matmul(t, nn::attention_apply(t, att, v, heads), P(p.wo));
  h = nn::layer_norm(t, nn::add(t, h, drop(o)), P(p.ln1_g), P(p.ln1_b));

  Var f = nn::relu(t, nn::linear(t, h, P(p.w_ff1), P(p.b_ff1)));
  f = nn::linear(t, f, P(p.w_ff2), P(p.b_ff2));
  h = nn::layer_norm(t, nn::add(t, h, drop(f)), P(p.ln2_g), P(p.ln2_b));

  Var est = nn::linear(t, h, P(p.w_out), P(p.b_out));
  return {residual ? nn::add(t, x, est) : est, att};
}

Var weighted_combination(Tape& t, Var x1, Var x2, Var attention_mean, Var mask, Var w_eta,
                         Var b_eta) {
  const auto T = t.value(x1).rows();
  if (t.value(x2).rows() != T || t.value(mask).rows() != T || t.value(attention_mean).rows() != T)
    throw Error("weighted_combination: shape mismatch");
  Var eta = nn::sigmoid(t, nn::linear(t, nn::concat_cols(t, attention_mean, mask), w_eta, b_eta));
  return nn::lerp(t, x1, x2, eta);
}

namespace {

// Missing slots take the monotone cubic through the observed ones.
Matrix pchip_fill(const Matrix& x, const Matrix& m) {
  std::vector<double> v(static_cast<std::size_t>(x.rows()));
  std::size_t n_obs = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    v[static_cast<std::size_t>(i)] = m(i, 0) != 0.0 ? x(i, 0) : kMissing;
    n_obs += m(i, 0) != 0.0;
  }
  if (n_obs < 2) return x;
  const auto filled = impute_pchip(GazeSequence(std::move(v))).sequence;
  Matrix out(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, 0) = filled[static_cast<std::size_t>(i)];
  return out;
}

}  // namespace

SaitsForward saits_forward(Tape& t, const SaitsModel& model, const Matrix& x, const Matrix& m,
                           bool training, std::mt19937_64* rng, bool grads) {
  const auto& c = model.config;
  const auto T = static_cast<Eigen::Index>(c.seq_len);
  if (x.rows() != T || m.rows() != T || x.cols() != 1 || m.cols() != 1)
    throw Error("saits_forward: expected " + std::to_string(T) + " x 1 inputs");
  const Matrix pe = sinusoidal_encoding(c.seq_len, c.d_model);

  Var xv = t.constant(c.input_fill == InputFill::Pchip ? pchip_fill(x, m) : x);
  Var mv = t.constant(m);
  Var inv_m = t.constant((1.0 - m.array()).matrix());

  const bool residual = c.input_fill == InputFill::Pchip;
  auto b1 = dmsa_block(t, model.blocks[0], xv, mv, pe, c.n_heads, c.dropout, training, rng, grads,
                       residual);
  // Observed values are kept; block 1 fills the rest for block 2.
  Var x_prime = nn::add(t, nn::mul(t, mv, xv), nn::mul(t, inv_m, b1.estimate));
  auto b2 =
      dmsa_block(t, model.blocks[1], x_prime, mv, pe, c.n_heads, c.dropout, training, rng, grads,
                 residual);

  Var a_mean = nn::head_mean(t, b2.attention, c.n_heads);
  Var x3 = weighted_combination(t, b1.estimate, b2.estimate, a_mean, mv,
                                bind(t, model.w_eta, grads), bind(t, model.b_eta, grads));
  for (Var v : {b1.estimate, b2.estimate, x3})
    if (!nn::all_finite(t.value(v))) throw Error("saits_forward: non-finite activations");
  return {b1.estimate, b2.estimate, x3, b1.attention, b2.attention};
}

// ---- loss -----------------------------------------------------------------

LossParts saits_loss(const MaskedBatch& batch, const std::array<Matrix, 3>& estimates,
                     double w_reconstruction, double w_imputation) {
  batch.validate();
  const Matrix in_mask = batch.input_mask();
  const double n_rec = in_mask.sum();
  const double n_imp = batch.artificial_mask.sum();
  LossParts out;
  for (const auto& e : estimates) {
    if (e.rows() != batch.values.rows() || e.cols() != batch.values.cols())
      throw Error("saits_loss: estimate shape mismatch");
    const Matrix sq = (e - batch.values).array().square().matrix();
    if (n_rec > 0) out.reconstruction += in_mask.cwiseProduct(sq).sum() / n_rec;
    if (n_imp > 0) out.imputation += batch.artificial_mask.cwiseProduct(sq).sum() / n_imp;
  }
  out.total = w_reconstruction * out.reconstruction + w_imputation * out.imputation;
  return out;
}

std::vector<std::size_t> coarse_artificial_mask(std::size_t seq_len, std::size_t factor,
                                                const blinks::BlinkStats& stats, double rate,
                                                std::uint64_t seed) {
  std::vector<std::size_t> out;
  if (rate <= 0.0) return out;
  if (stats.empty() || stats.durations.empty()) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(rate);
    for (std::size_t i = 0; i < seq_len; ++i)
      if (coin(rng)) out.push_back(i);
    return out;
  }
  const std::size_t fine_len = seq_len * factor;
  const auto fine = blinks::sample_mask_at_rate(fine_len, stats, rate, seed);
  std::vector<std::size_t> per_block(seq_len, 0);
  for (auto i : fine.indices()) ++per_block[i / factor];
  for (std::size_t b = 0; b < seq_len; ++b)
    if (2 * per_block[b] > factor) out.push_back(b);
  return out;
}

// ---- training -------------------------------------------------------------

namespace {

struct Sample {
  Matrix x;    // T x 1, zero at missing
  Matrix obs;  // T x 1 indicator
};

Sample to_sample(const GazeSequence& s) {
  const auto T = static_cast<Eigen::Index>(s.size());
  Sample out{Matrix::Zero(T, 1), Matrix::Zero(T, 1)};
  for (Eigen::Index i = 0; i < T; ++i)
    if (!is_missing(s[static_cast<std::size_t>(i)])) {
      out.x(i, 0) = s[static_cast<std::size_t>(i)];
      out.obs(i, 0) = 1.0;
    }
  return out;
}

Matrix artificial_for(const Sample& s, const SaitsConfig& c, const blinks::BlinkStats& stats,
                      std::uint64_t seed) {
  Matrix art = Matrix::Zero(s.x.rows(), 1);
  for (auto i : coarse_artificial_mask(c.seq_len, c.factor, stats, c.artificial_mask_rate, seed))
    art(static_cast<Eigen::Index>(i), 0) = s.obs(static_cast<Eigen::Index>(i), 0);
  return art;
}

std::vector<Matrix> snapshot(const SaitsModel& m) {
  std::vector<Matrix> out;
  for (const auto* p : m.parameters()) out.push_back(p->value);
  return out;
}

void restore(SaitsModel& m, const std::vector<Matrix>& values) {
  auto ps = m.parameters();
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = values[i];
}

}  // namespace

SaitsTrainResult train_saits(const std::vector<GazeSequence>& sequences, const SaitsConfig& cfg,
                             const blinks::BlinkStats& stats, std::uint64_t seed, int fold,
                             int n_folds) {
  cfg.validate();
  if (n_folds < 1 || fold < 0 || fold >= n_folds) throw Error("train_saits: invalid fold");
  if (sequences.size() < 2) throw Error("train_saits: need at least two sequences");
  std::vector<Sample> data;
  for (const auto& s : sequences) {
    if (s.size() != cfg.seq_len)
      throw Error("train_saits: sequence " + s.meta().id() + " has length " +
                  std::to_string(s.size()) + ", expected " + std::to_string(cfg.seq_len));
    data.push_back(to_sample(s));
  }

  // Fold assignment from a seeded permutation.
  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 split_rng(mix_seed(seed, 0x5a175));
  std::shuffle(perm.begin(), perm.end(), split_rng);
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t r = 0; r < perm.size(); ++r) {
    const bool is_val = n_folds == 1 ? r < std::max<std::size_t>(1, perm.size() / 10)
                                     : static_cast<int>(r % static_cast<std::size_t>(n_folds)) == fold;
    (is_val ? val_idx : train_idx).push_back(perm[r]);
  }
  if (train_idx.empty() || val_idx.empty()) throw Error("train_saits: empty train or validation set");
  std::sort(val_idx.begin(), val_idx.end());

  SaitsTrainResult res;
  res.model = SaitsModel::init(cfg, mix_seed(seed, 0x1417));
  auto params = res.model.parameters();
  nn::Adam opt(params, nn::AdamConfig{cfg.lr});
  std::mt19937_64 rng(mix_seed(seed, 0xd0));

  std::vector<Matrix> val_art;
  for (auto i : val_idx) val_art.push_back(artificial_for(data[i], cfg, stats, mix_seed(seed, 0x7a1 + i)));

  double best = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_values = snapshot(res.model);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t b0 = 0; b0 < train_idx.size(); b0 += cfg.batch) {
      const std::size_t b1 = std::min(train_idx.size(), b0 + cfg.batch);
      std::vector<Matrix> art;
      double n_rec = 0.0, n_imp = 0.0;
      for (std::size_t j = b0; j < b1; ++j) {
        const auto i = train_idx[j];
        art.push_back(artificial_for(data[i], cfg, stats,
                                     mix_seed(seed, (static_cast<std::uint64_t>(epoch) << 32) ^ i)));
        n_rec += (data[i].obs - art.back()).sum();
        n_imp += art.back().sum();
      }
      opt.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t j = b0; j < b1; ++j) {
        const auto& s = data[train_idx[j]];
        const Matrix& a = art[j - b0];
        const Matrix in_mask = s.obs - a;
        Tape t;
        auto f = saits_forward(t, res.model, s.x.cwiseProduct(in_mask), in_mask, true, &rng, true);
        std::vector<Var> terms;
        for (Var e : {f.x1, f.x2, f.x3}) {
          if (n_rec > 0 && cfg.w_reconstruction > 0)
            terms.push_back(nn::scale(t, nn::weighted_sse(t, e, s.x, in_mask, n_rec), cfg.w_reconstruction));
          if (n_imp > 0 && cfg.w_imputation > 0)
            terms.push_back(nn::scale(t, nn::weighted_sse(t, e, s.x, a, n_imp), cfg.w_imputation));
        }
        Var loss = nn::sum_scalars(t, terms);
        batch_loss += t.value(loss)(0, 0);
        if (t.needs_grad(loss)) t.backward(loss);
      }
      if (!std::isfinite(batch_loss))
        throw Error("train_saits: non-finite loss at epoch " + std::to_string(epoch));
      opt.step();
      epoch_loss += batch_loss;
      ++n_batches;
    }
    res.train_loss.push_back(epoch_loss / static_cast<double>(n_batches));

    double sse = 0.0, count = 0.0;
    for (std::size_t v = 0; v < val_idx.size(); ++v) {
      const auto& s = data[val_idx[v]];
      const Matrix in_mask = s.obs - val_art[v];
      Tape t;
      auto f = saits_forward(t, res.model, s.x.cwiseProduct(in_mask), in_mask, false, nullptr, false);
      sse += val_art[v].cwiseProduct((t.value(f.x3) - s.x).array().square().matrix()).sum();
      count += val_art[v].sum();
    }
    const double val = count > 0 ? sse / count : 0.0;
    if (!std::isfinite(val)) throw Error("train_saits: non-finite validation loss at epoch " + std::to_string(epoch));
    res.val_loss.push_back(val);
    if (val < best) {
      best = val;
      res.best_epoch = epoch;
      best_values = snapshot(res.model);
    }
  }
  restore(res.model, best_values);
  return res;
}

ImputerOutput impute_saits(const SaitsModel& model, const GazeSequence& seq) {
  if (seq.size() != model.config.seq_len)
    throw Error("impute_saits: sequence length " + std::to_string(seq.size()) +
                " does not match model seq_len " + std::to_string(model.config.seq_len));
  if (seq.complete()) return {seq, MissingMask({}, seq.size())};
  const Sample s = to_sample(seq);
  Tape t;
  auto f = saits_forward(t, model, s.x, s.obs, false, nullptr, false);
  const Matrix& x3 = t.value(f.x3);
  std::vector<double> values(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) values[i] = x3(static_cast<Eigen::Index>(i), 0);
  return splice_missing(seq, values);
}

}  // namespace spem
