#include "spem/imputers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spem/resample.hpp"

namespace spem {

ImputerOutput splice_missing(const GazeSequence& seq, const std::vector<double>& values) {
  if (values.size() != seq.size()) throw Error("imputer: value length mismatch");
  std::vector<double> out(seq.samples().begin(), seq.samples().end());
  std::vector<std::size_t> filled;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!is_missing(out[i])) continue;
    if (!std::isfinite(values[i])) throw Error("imputer: produced a non-finite value");
    out[i] = values[i];
    filled.push_back(i);
  }
  return {seq.with_samples(std::move(out)), MissingMask(std::move(filled), seq.size())};
}

// ---- PCHIP ----------------------------------------------------------------

ImputerOutput impute_pchip(const GazeSequence& seq) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (!is_missing(seq[i])) {
      xs.push_back(static_cast<double>(i));
      ys.push_back(seq[i]);
    }
  if (xs.size() < 2) throw Error("impute_pchip: needs at least 2 observed samples");
  const PchipSpline sp(xs, ys);
  std::vector<double> v(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const double x = static_cast<double>(i);
    v[i] = x < xs.front() ? ys.front() : x > xs.back() ? ys.back() : sp(x);
  }
  return splice_missing(seq, v);
}

// ---- SSA ------------------------------------------------------------------

void SsaConfig::validate(std::size_t len) const {
  if (window_L < 2 || 2 * window_L > len)
    throw Error("ssa: window_L must satisfy 2 <= L <= len/2 (L=" + std::to_string(window_L) +
                ", len=" + std::to_string(len) + ")");
  if (rank_r > window_L) throw Error("ssa: rank_r must be <= window_L");
  if (rank_r == 0 && !(energy_threshold > 0.0 && energy_threshold <= 1.0))
    throw Error("ssa: energy_threshold must be in (0, 1]");
}

std::vector<double> SsaDecomposition::reconstruct(std::size_t r) const {
  if (components.empty()) return {};
  std::vector<double> out(components.front().size(), 0.0);
  for (std::size_t i = 0; i < std::min(r, components.size()); ++i)
    for (std::size_t n = 0; n < out.size(); ++n) out[n] += components[i][n];
  return out;
}

std::size_t SsaDecomposition::rank_for_energy(double fraction) const {
  double total = 0.0;
  for (double s : singular_values) total += s * s;
  if (total == 0.0) return 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < singular_values.size(); ++i) {
    acc += singular_values[i] * singular_values[i];
    if (acc >= fraction * total) return i + 1;
  }
  return singular_values.size();
}

SsaDecomposition ssa_decompose(const std::vector<double>& series, std::size_t L) {
  const std::size_t N = series.size();
  if (L < 2 || L > N) throw Error("ssa_decompose: window must be in [2, N]");
  for (double v : series)
    if (!std::isfinite(v)) throw Error("ssa_decompose: series must be complete");
  const std::size_t K = N - L + 1;

  Eigen::MatrixXd X(L, K);
  for (std::size_t j = 0; j < K; ++j)
    for (std::size_t i = 0; i < L; ++i) X(i, j) = series[i + j];

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Index d = svd.singularValues().size();

  SsaDecomposition out;
  out.left_vectors = svd.matrixU();
  out.singular_values.assign(svd.singularValues().data(), svd.singularValues().data() + d);
  out.components.reserve(static_cast<std::size_t>(d));

  // diagonal averaging of sigma_i u_i v_i^T
  std::vector<double> counts(N, 0.0);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < K; ++j) counts[i + j] += 1.0;
  for (Eigen::Index c = 0; c < d; ++c) {
    const Eigen::VectorXd u = svd.matrixU().col(c);
    const Eigen::VectorXd v = svd.matrixV().col(c) * svd.singularValues()(c);
    std::vector<double> comp(N, 0.0);
    for (std::size_t j = 0; j < K; ++j)
      for (std::size_t i = 0; i < L; ++i)
        comp[i + j] += u(static_cast<Eigen::Index>(i)) * v(static_cast<Eigen::Index>(j));
    for (std::size_t n = 0; n < N; ++n) comp[n] /= counts[n];
    out.components.push_back(std::move(comp));
  }
  return out;
}

SsaDecomposition ssa_decompose(const GazeSequence& seq, std::size_t L) {
  if (!seq.complete()) throw Error("ssa_decompose: sequence must be complete");
  SsaConfig cfg;
  cfg.window_L = L;
  cfg.validate(seq.size());
  return ssa_decompose(std::vector<double>(seq.samples().begin(), seq.samples().end()), L);
}

std::vector<double> ssa_recurrence(const SsaDecomposition& d, std::size_t r) {
  const auto L = static_cast<std::size_t>(d.left_vectors.rows());
  r = std::min<std::size_t>(r, static_cast<std::size_t>(d.left_vectors.cols()));
  double nu2 = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const double pi = d.left_vectors(static_cast<Eigen::Index>(L - 1), static_cast<Eigen::Index>(i));
    nu2 += pi * pi;
  }
  if (nu2 >= 1.0 - 1e-9) throw Error("ssa: verticality coefficient ~1, recurrence undefined");
  std::vector<double> a(L - 1, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    const auto ci = static_cast<Eigen::Index>(i);
    const double pi = d.left_vectors(static_cast<Eigen::Index>(L - 1), ci);
    for (std::size_t j = 0; j + 1 < L; ++j) a[j] += pi * d.left_vectors(static_cast<Eigen::Index>(j), ci);
  }
  for (double& v : a) v /= 1.0 - nu2;
  return a;
}

std::vector<double> ssa_forecast(const std::vector<double>& series, const SsaConfig& cfg,
                                 std::size_t steps) {
  const std::size_t L = cfg.window_L;
  if (series.size() < L)
    throw Error("ssa: segment of " + std::to_string(series.size()) +
                " samples is shorter than window_L=" + std::to_string(L));
  const auto dec = ssa_decompose(series, L);
  const std::size_t r = cfg.rank_r ? cfg.rank_r : dec.rank_for_energy(cfg.energy_threshold);
  const auto a = ssa_recurrence(dec, r);
  std::vector<double> y = dec.reconstruct(r);
  y.reserve(y.size() + steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t n = y.size();
    double v = 0.0;
    for (std::size_t j = 0; j + 1 < L; ++j) v += a[j] * y[n - L + 1 + j];
    y.push_back(v);
  }
  return {y.end() - static_cast<std::ptrdiff_t>(steps), y.end()};
}

ImputerOutput impute_ssa(const GazeSequence& seq, const SsaConfig& cfg) {
  cfg.validate(seq.size());
  const std::size_t L = cfg.window_L;
  std::vector<double> work(seq.samples().begin(), seq.samples().end());
  const auto gaps = MissingMask::of_missing(seq).runs();
  if (gaps.empty()) return splice_missing(seq, work);

  for (std::size_t g = 0; g < gaps.size(); ++g) {
    const auto [a, b] = gaps[g];
    const std::size_t len = b - a;
    const std::size_t next = g + 1 < gaps.size() ? gaps[g + 1].first : seq.size();

    // forward: everything before the gap, earlier gaps already filled
    const bool fwd_ok = a >= L && cfg.blend != ForecastBlend::Backward;
    // backward: the observed run after the gap, reversed
    const bool bwd_ok = next - b >= L && cfg.blend != ForecastBlend::Forward;

    std::vector<double> fwd, bwd;
    if (fwd_ok) fwd = ssa_forecast({work.begin(), work.begin() + static_cast<std::ptrdiff_t>(a)}, cfg, len);
    if (bwd_ok) {
      std::vector<double> tail(work.begin() + static_cast<std::ptrdiff_t>(b),
                               work.begin() + static_cast<std::ptrdiff_t>(next));
      std::reverse(tail.begin(), tail.end());
      bwd = ssa_forecast(tail, cfg, len);
      std::reverse(bwd.begin(), bwd.end());
    }
    if (fwd.empty() && bwd.empty()) {
      // Fall back to the other direction when the configured one is too short.
      if (a >= L)
        fwd = ssa_forecast({work.begin(), work.begin() + static_cast<std::ptrdiff_t>(a)}, cfg, len);
      else if (next - b >= L) {
        std::vector<double> tail(work.begin() + static_cast<std::ptrdiff_t>(b),
                                 work.begin() + static_cast<std::ptrdiff_t>(next));
        std::reverse(tail.begin(), tail.end());
        bwd = ssa_forecast(tail, cfg, len);
        std::reverse(bwd.begin(), bwd.end());
      } else {
        throw Error("impute_ssa: gap [" + std::to_string(a) + ", " + std::to_string(b) +
                    ") has no adjacent segment of window_L=" + std::to_string(L) + " samples");
      }
    }
    for (std::size_t t = 0; t < len; ++t) {
      double v;
      if (fwd.empty())
        v = bwd[t];
      else if (bwd.empty())
        v = fwd[t];
      else {
        const double w = static_cast<double>(t + 1) / static_cast<double>(len + 1);
        v = (1.0 - w) * fwd[t] + w * bwd[t];
      }
      work[a + t] = v;
    }
  }
  return splice_missing(seq, work);
}

// ---- KNN ------------------------------------------------------------------

void KnnConfig::validate() const {
  if (k < 1) throw Error("knn: k must be >= 1");
  if (context < 1) throw Error("knn: context must be >= 1");
}

namespace {

struct Candidate {
  double dist;
  std::size_t lib;
  std::size_t offset;
};

// Fills work[a, a+len) given left context of cl samples and right context of
// cr samples starting at a+len (cr may be 0).
void knn_fill(std::vector<double>& work, std::size_t a, std::size_t len, std::size_t cl,
              std::size_t cr, const std::vector<GazeSequence>& library, const KnnConfig& cfg) {
  const std::size_t span = cl + len + cr;
  std::vector<Candidate> cands;
  for (std::size_t s = 0; s < library.size(); ++s) {
    const auto lib = library[s].samples();
    if (lib.size() < span) continue;
    for (std::size_t o = 0; o + span <= lib.size(); ++o) {
      double d = 0.0;
      for (std::size_t j = 0; j < cl; ++j) {
        const double e = lib[o + j] - work[a - cl + j];
        d += e * e;
      }
      for (std::size_t j = 0; j < cr; ++j) {
        const double e = lib[o + cl + len + j] - work[a + len + j];
        d += e * e;
      }
      cands.push_back({std::sqrt(d), s, o});
    }
  }
  if (cands.size() < cfg.k)
    throw Error("impute_knn: k=" + std::to_string(cfg.k) + " exceeds the " +
                std::to_string(cands.size()) + " library windows available");
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(cfg.k), cands.end(),
                    [](const Candidate& x, const Candidate& y) {
                      if (x.dist != y.dist) return x.dist < y.dist;
                      if (x.lib != y.lib) return x.lib < y.lib;
                      return x.offset < y.offset;
                    });
  std::vector<double> acc(len, 0.0);
  double wsum = 0.0;
  for (std::size_t c = 0; c < cfg.k; ++c) {
    const double w = cfg.weighting == KnnWeighting::Uniform ? 1.0 : 1.0 / (cands[c].dist + 1e-12);
    const auto lib = library[cands[c].lib].samples();
    for (std::size_t t = 0; t < len; ++t) acc[t] += w * lib[cands[c].offset + cl + t];
    wsum += w;
  }
  for (std::size_t t = 0; t < len; ++t) work[a + t] = acc[t] / wsum;
}

}  // namespace

ImputerOutput impute_knn(const GazeSequence& seq, const std::vector<GazeSequence>& library,
                         const KnnConfig& cfg) {
  cfg.validate();
  if (library.empty()) throw Error("impute_knn: empty library");
  std::size_t max_lib = 0;
  for (const auto& l : library) {
    if (!l.complete()) throw Error("impute_knn: library sequences must be complete");
    max_lib = std::max(max_lib, l.size());
  }

  std::vector<double> work(seq.samples().begin(), seq.samples().end());
  const auto gaps = MissingMask::of_missing(seq).runs();
  for (std::size_t g = 0; g < gaps.size(); ++g) {
    const auto [a, b] = gaps[g];
    const std::size_t next = g + 1 < gaps.size() ? gaps[g + 1].first : seq.size();
    const std::size_t cl = std::min(cfg.context, a);
    const std::size_t cr = std::min(cfg.context, next - b);
    if (cl + cr < cfg.context)
      throw Error("impute_knn: gap [" + std::to_string(a) + ", " + std::to_string(b) +
                  ") has insufficient context");
    if (cl + cr >= max_lib) throw Error("impute_knn: library sequences shorter than the context");

    // Long gaps are filled chunk by chunk, each chunk conditioned on the
    // previously filled samples; only the final chunk sees the right flank.
    std::size_t pos = a;
    while (pos < b) {
      const std::size_t left = std::min(cfg.context, pos);
      // leave enough slack in the longest library sequence for k windows
      const std::size_t slack = cfg.k - 1;
      if (max_lib <= left + slack) throw Error("impute_knn: gap too long for the library");
      const std::size_t room = max_lib - left - slack;
      const std::size_t remaining = b - pos;
      if (remaining + cr <= room) {
        knn_fill(work, pos, remaining, left, cr, library, cfg);
        pos = b;
      } else {
        if (left == 0) throw Error("impute_knn: gap too long for the library");
        const std::size_t chunk = std::min(remaining, room);
        knn_fill(work, pos, chunk, left, 0, library, cfg);
        pos += chunk;
      }
    }
  }
  return splice_missing(seq, work);
}

// ---- normalization wrapper -----------------------------------------------

ImputerOutput ZscoreImputer::impute(const GazeSequence& seq) const {
  if (seq.complete()) return {seq, MissingMask({}, seq.size())};
  const auto [z, params] = zscore(seq);
  const auto inner = inner_->impute(z);
  std::vector<double> values(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) values[i] = params.invert(inner.sequence[i]);
  return splice_missing(seq, values);
}

}  // namespace spem
