#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "sidechan/acoustic_synth.hpp"
#include "sidechan/detector.hpp"
#include "sidechan/dsp.hpp"
#include "sidechan/process_sim.hpp"

namespace sidechan::harness {

void write_trace_csv(const std::filesystem::path& path,
                     std::span<const process::TelemetryFrame> trace);
/// Reads a trace CSV. Reported valve/dry flags are not part of the format and come back false.
std::vector<process::TelemetryFrame> read_trace_csv(const std::filesystem::path& path);

void write_labels_csv(const std::filesystem::path& path, std::span<const synth::LabelChange> labels);
std::vector<synth::LabelChange> read_labels_csv(const std::filesystem::path& path);

void write_alerts_csv(const std::filesystem::path& path, std::span<const detector::Alert> alerts);

/// `freq_hz,power` rows; used for both per-frame and class-averaged (dB) spectra.
void write_spectrum_csv(const std::filesystem::path& path, double binWidth,
                        std::span<const double> values);
struct SpectrumRow {
  double freqHz;
  double power;
};
std::vector<SpectrumRow> read_spectrum_csv(const std::filesystem::path& path);

}  // namespace sidechan::harness
