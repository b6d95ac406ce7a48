#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sidechan/acoustic_synth.hpp"
#include "sidechan/detector.hpp"
#include "sidechan/dsp.hpp"
#include "sidechan/harness/scenario.hpp"
#include "sidechan/process_sim.hpp"
#include "sidechan/profiling.hpp"

namespace sidechan::harness {

/// Per-frame activity RMS and band features of a sample stream.
struct FrameAnalysis {
  dsp::FrameSpec frameSpec;
  double sampleRate = 0.0;
  std::vector<double> activityRms;
  std::vector<dsp::BandFeatures> features;
};

FrameAnalysis analyze_audio(std::span<const float> samples, double sampleRate,
                            const dsp::FrameSpec& spec, std::span<const dsp::Band> bands);

/// Ground-truth activity label per frame, taken at the frame's centre sample.
std::vector<profiling::SegmentLabel> truth_frame_labels(const synth::RenderedAudio& audio,
                                                        const dsp::FrameSpec& spec);

struct TrainResult {
  profiling::ProfileDB db;
  std::vector<profiling::Segment> segments;
};

/// Calibrates segmentation, segments and trains profiles from attack-free audio.
TrainResult train_from_audio(std::span<const float> samples, double sampleRate,
                             const dsp::FrameSpec& spec,
                             std::span<const dsp::Band> bands = dsp::default_bands());

struct DetectionResult {
  std::vector<profiling::Segment> segments;
  std::vector<detector::Alert> alerts;
};

DetectionResult detect_from_audio(std::span<const float> samples, double sampleRate,
                                  const profiling::ProfileDB& db,
                                  const detector::DetectionConfig& cfg);

struct TruthEpisode {
  std::string kind;  // "pump_override" or "valve_open"
  double startS = 0.0;
  double endS = 0.0;
};

struct Confusion {
  std::size_t truePositives = 0;
  std::size_t falsePositives = 0;
  std::size_t falseNegatives = 0;
  bool operator==(const Confusion&) const = default;
};

struct RunReport {
  std::string scenarioId;
  std::size_t activeSegments = 0;
  std::size_t inactiveSegments = 0;
  std::vector<detector::Alert> alerts;
  std::vector<TruthEpisode> eventTruth;
  Confusion confusion;

  std::string to_text() const;
};

std::vector<TruthEpisode> truth_episodes(const process::AttackScript& script);

/// An alert covers [time of first triggering frame, end of triggering frame]; it matches a
/// truth window when the ranges overlap. Unmatched alerts are FP, unmatched windows FN.
Confusion match_episodes(std::span<const detector::Alert> alerts,
                         std::span<const TruthEpisode> truth, const dsp::FrameSpec& spec,
                         double sampleRate, std::size_t consecutiveFrames);

RunReport build_report(const std::string& scenarioId, const DetectionResult& detection,
                       const process::AttackScript& script, const dsp::FrameSpec& spec,
                       double sampleRate, std::size_t consecutiveFrames);

struct SimulatedRun {
  std::vector<process::TelemetryFrame> trace;
  synth::RenderedAudio audio;  // already quantised to the PCM16 grid
};

/// Simulates the scenario and renders its audio with the scenario's synth seed.
SimulatedRun simulate_and_render(const ScenarioDoc& scenario);

struct ClassSpectrum {
  synth::AcousticState state = synth::AcousticState::PumpInactiveNormal;
  std::size_t frames = 0;
  double binWidth = 0.0;
  std::vector<double> meanDb;  // mean over frames of 10*log10(bin + floor)
};

/// Averaged log power spectrum of every acoustic state present, using only frames that lie
/// entirely inside one labelled state.
std::vector<ClassSpectrum> class_spectra(std::span<const float> samples, double sampleRate,
                                         std::span<const synth::LabelChange> labels,
                                         const dsp::FrameSpec& spec);

std::string spectrum_file_name(synth::AcousticState state);

struct E2EOutputs {
  RunReport report;
  std::filesystem::path trainWav;
  std::filesystem::path detectWav;
  std::filesystem::path alertsCsv;
  std::filesystem::path reportTxt;
  std::filesystem::path dbJson;
};

/// simulate -> synth -> train (attack-free copy, synth seed `seed`) -> simulate -> synth
/// (scenario as given, synth seed `seed + 1`) -> detect -> report. Everything lands in `outDir`.
E2EOutputs run_e2e(const ScenarioDoc& scenario, std::uint64_t seed,
                   const std::filesystem::path& outDir);

}  // namespace sidechan::harness
