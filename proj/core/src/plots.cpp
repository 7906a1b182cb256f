#include "spem/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "spem/metrics.hpp"
#include "spem/synthgen.hpp"

namespace spem::plots {

namespace fs = std::filesystem;

namespace {

constexpr double kW = 1000.0, kH = 320.0;
constexpr double kLeft = 60.0, kRight = 20.0, kTop = 30.0, kBottom = 40.0;

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string overlay_svg(const std::vector<Series>& lines, const MissingMask& gaps, double rate_hz,
                        const std::string& title) {
  if (lines.empty()) throw Error("overlay_svg: nothing to plot");
  if (!(rate_hz > 0.0)) throw Error("overlay_svg: rate must be positive");
  std::size_t n = 0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& l : lines) {
    n = std::max(n, l.values.size());
    for (double v : l.values)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  }
  if (!std::isfinite(lo)) lo = -1.0, hi = 1.0;
  if (hi - lo < 1e-9) lo -= 1.0, hi += 1.0;
  const double t_end = static_cast<double>(n) * 1000.0 / rate_hz;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto X = [&](double ms) { return kLeft + pw * ms / t_end; };
  auto Y = [&](double v) { return kTop + ph * (hi - v) / (hi - lo); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kLeft << "\" y=\"18\" font-size=\"14\">" << escape(title) << "</text>\n";
  for (const auto& [b, e] : gaps.runs()) {
    const double b_ms = static_cast<double>(b) * 1000.0 / rate_hz;
    const double e_ms = static_cast<double>(e) * 1000.0 / rate_hz;
    s << "<rect class=\"gap\" data-start-ms=\"" << num(b_ms) << "\" data-end-ms=\"" << num(e_ms)
      << "\" x=\"" << num(X(b_ms)) << "\" y=\"" << kTop << "\" width=\"" << num(X(e_ms) - X(b_ms))
      << "\" height=\"" << ph << "\" fill=\"#bbbbbb\" fill-opacity=\"0.5\"/>\n";
  }
  const std::size_t stride = std::max<std::size_t>(1, n / 3000);
  for (const auto& l : lines) {
    std::string d;
    bool pen = false;
    for (std::size_t i = 0; i < l.values.size(); i += stride) {
      const double v = l.values[i];
      if (!std::isfinite(v)) {
        pen = false;
        continue;
      }
      d += (pen ? " L" : " M") + num(X(static_cast<double>(i) * 1000.0 / rate_hz)) + "," + num(Y(v));
      pen = true;
    }
    s << "<path data-label=\"" << escape(l.label) << "\" d=\"" << d << "\" fill=\"none\" stroke=\""
      << l.color << "\" stroke-width=\"1\"/>\n";
  }
  // axes and legend
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\""
    << kTop + ph << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
    << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 8 << "\" font-size=\"12\">time (ms), 0 to "
    << num(t_end) << "</text>\n";
  s << "<text x=\"4\" y=\"" << kTop + 10 << "\" font-size=\"11\">" << num(hi) << "</text>\n";
  s << "<text x=\"4\" y=\"" << kTop + ph << "\" font-size=\"11\">" << num(lo) << "</text>\n";
  for (std::size_t i = 0; i < lines.size(); ++i)
    s << "<text x=\"" << kLeft + pw - 160 << "\" y=\"" << kTop + 14 + 14 * static_cast<double>(i)
      << "\" font-size=\"11\" fill=\"" << lines[i].color << "\">" << escape(lines[i].label) << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

Spectrogram spectrogram(const GazeSequence& seq, std::size_t window, double overlap, double max_hz) {
  if (!seq.complete()) throw Error("spectrogram: sequence has missing values");
  if (window < 2 || !(overlap >= 0.0 && overlap < 1.0)) throw Error("spectrogram: invalid window");
  const std::size_t n = seq.size();
  const std::size_t w = std::min(window, n);
  const std::size_t hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(w) * (1.0 - overlap))));
  Spectrogram out;
  const double bin = seq.rate_hz() / static_cast<double>(w);
  for (std::size_t k = 0; k <= w / 2 && static_cast<double>(k) * bin <= max_hz; ++k)
    out.freqs_hz.push_back(static_cast<double>(k) * bin);
  std::vector<double> frame(w);
  for (std::size_t start = 0; start + w <= n; start += hop) {
    for (std::size_t i = 0; i < w; ++i) {
      const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(w - 1));
      frame[i] = seq[start + i] * hann;
    }
    const auto X = metrics::dft(GazeSequence(frame, seq.rate_hz()));
    std::vector<double> col;
    for (std::size_t k = 0; k < out.freqs_hz.size(); ++k)
      col.push_back(10.0 * std::log10(std::norm(X.coefficients[k]) + 1e-12));
    out.power_db.push_back(std::move(col));
    out.times_s.push_back((static_cast<double>(start) + static_cast<double>(w) / 2.0) / seq.rate_hz());
  }
  return out;
}

std::string spectrogram_svg(const Spectrogram& sp, const std::string& title) {
  if (sp.power_db.empty() || sp.freqs_hz.empty()) throw Error("spectrogram_svg: empty spectrogram");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& c : sp.power_db)
    for (double v : c) lo = std::min(lo, v), hi = std::max(hi, v);
  lo = std::max(lo, hi - 80.0);
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  const double cw = pw / static_cast<double>(sp.power_db.size());
  const double chh = ph / static_cast<double>(sp.freqs_hz.size());
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kLeft << "\" y=\"18\" font-size=\"14\">" << escape(title) << "</text>\n";
  for (std::size_t t = 0; t < sp.power_db.size(); ++t)
    for (std::size_t f = 0; f < sp.freqs_hz.size(); ++f) {
      const double u = std::clamp((sp.power_db[t][f] - lo) / std::max(hi - lo, 1e-9), 0.0, 1.0);
      // dark blue -> yellow
      const int r = static_cast<int>(30 + 225 * u), g = static_cast<int>(20 + 210 * u),
                b = static_cast<int>(90 + 40 * (1.0 - u));
      s << "<rect x=\"" << num(kLeft + cw * static_cast<double>(t)) << "\" y=\""
        << num(kTop + ph - chh * static_cast<double>(f + 1)) << "\" width=\"" << num(cw + 0.5)
        << "\" height=\"" << num(chh + 0.5) << "\" fill=\"rgb(" << r << "," << g << "," << b << ")\"/>\n";
    }
  s << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 8 << "\" font-size=\"12\">time (s), 0 to "
    << num(sp.times_s.back()) << "</text>\n";
  s << "<text x=\"4\" y=\"" << kTop + 10 << "\" font-size=\"11\">" << num(sp.freqs_hz.back()) << " Hz</text>\n";
  s << "<text x=\"4\" y=\"" << kTop + ph << "\" font-size=\"11\">0 Hz</text>\n";
  s << "</svg>\n";
  return s.str();
}

namespace {

void write(const fs::path& file, const std::string& text, std::vector<fs::path>& written) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
  written.push_back(file);
}

std::vector<double> values(const GazeSequence& s) { return {s.samples().begin(), s.samples().end()}; }

}  // namespace

std::vector<fs::path> emit_plots(const fs::path& results_dir) {
  const fs::path art = results_dir / "artifacts";
  if (!fs::is_directory(art)) throw Error("emit_plots: no artifacts under " + results_dir.string());
  const fs::path out_dir = results_dir / "plots";
  fs::create_directories(out_dir);
  std::vector<fs::path> seq_dirs;
  for (const auto& e : fs::directory_iterator(art))
    if (e.is_directory()) seq_dirs.push_back(e.path());
  std::sort(seq_dirs.begin(), seq_dirs.end());
  if (seq_dirs.empty()) throw Error("emit_plots: no sequence artifacts under " + art.string());

  static const char* palette[] = {"#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"};
  std::vector<fs::path> written;
  for (const auto& dir : seq_dirs) {
    const auto id = dir.filename().string();
    for (const char* f : {"original.csv", "corrupted.csv", "mask.txt"})
      if (!fs::exists(dir / f)) throw Error("emit_plots: missing " + (dir / f).string());
    const auto original = read_sequence(dir / "original.csv");
    const auto mask = read_mask(dir / "mask.txt", original.size());

    std::vector<Series> lines{{"original", values(original), "#1f77b4"}};
    const auto spec = synth::preset(original.meta().task);
    if (static_cast<std::size_t>(std::llround(spec.duration_s * spec.rate_hz)) == original.size() &&
        spec.rate_hz == original.rate_hz()) {
      const auto [tx, ty] = synth::target_trajectory(spec);
      lines.push_back({"target", values(original.meta().axis == Axis::X ? tx : ty), "#7f7f7f"});
    }
    std::vector<fs::path> recon;
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (name.size() > 6 && (name.ends_with("-U.csv") || name.ends_with("-RAE.csv"))) recon.push_back(e.path());
    }
    std::sort(recon.begin(), recon.end());
    std::size_t c = 0;
    for (const auto& p : recon)
      lines.push_back({p.stem().string(), values(read_sequence(p)), palette[c++ % 6]});
    write(out_dir / ("overlay_" + id + ".svg"), overlay_svg(lines, mask, original.rate_hz(), id), written);

    write(out_dir / ("spectrogram_" + id + "_original.svg"),
          spectrogram_svg(spectrogram(original), id + " original"), written);
    for (const auto& p : recon)
      write(out_dir / ("spectrogram_" + id + "_" + p.stem().string() + ".svg"),
            spectrogram_svg(spectrogram(read_sequence(p)), id + " " + p.stem().string()), written);
  }
  return written;
}

}  // namespace spem::plots
