#pragma once

// Dependency-free SVG figures: signal overlays with shaded gaps and
// short-time DFT spectrograms.

#include <filesystem>
#include <string>
#include <vector>

#include "spem/core.hpp"

namespace spem::plots {

struct Series {
  std::string label;
  std::vector<double> values;  // missing samples break the line
  std::string color;
};

// Time axis in ms; every run of `gaps` is drawn as a shaded band.
std::string overlay_svg(const std::vector<Series>& lines, const MissingMask& gaps, double rate_hz,
                        const std::string& title);

struct Spectrogram {
  std::vector<double> times_s;  // window centers
  std::vector<double> freqs_hz;
  std::vector<std::vector<double>> power_db;  // [time][freq]
};

// Hann-windowed short-time DFT. Sequences shorter than `window` use one
// window spanning the whole sequence.
Spectrogram spectrogram(const GazeSequence& seq, std::size_t window = 1024, double overlap = 0.75,
                        double max_hz = 50.0);

std::string spectrogram_svg(const Spectrogram& s, const std::string& title);

// Reads <dir>/artifacts/<sequence>/ and writes <dir>/plots/*.svg. Returns the
// written files.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& results_dir);

}  // namespace spem::plots
