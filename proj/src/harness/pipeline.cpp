#include "sidechan/harness/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "sidechan/error.hpp"
#include "sidechan/harness/csv_io.hpp"
#include "sidechan/harness/wav.hpp"

namespace sidechan::harness {

using profiling::SegmentLabel;

FrameAnalysis analyze_audio(std::span<const float> samples, double sampleRate,
                            const dsp::FrameSpec& spec, std::span<const dsp::Band> bands) {
  dsp::SpectrumAnalyzer analyzer(spec, sampleRate);
  const std::size_t n = dsp::frame_count(samples.size(), spec);
  if (n == 0) {
    throw InvalidArgument(fmt::format("audio of {} samples is shorter than one frame ({})",
                                      samples.size(), spec.frameLen));
  }
  FrameAnalysis fa;
  fa.frameSpec = spec;
  fa.sampleRate = sampleRate;
  fa.activityRms.reserve(n);
  fa.features.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const dsp::PowerSpectrum ps = analyzer.analyze(samples, k);
    fa.activityRms.push_back(dsp::band_rms(ps, profiling::kActivityBandLowHz,
                                           profiling::kActivityBandHighHz, analyzer.window_power()));
    fa.features.push_back(dsp::features(ps, bands));
  }
  return fa;
}

std::vector<SegmentLabel> truth_frame_labels(const synth::RenderedAudio& audio,
                                             const dsp::FrameSpec& spec) {
  const std::size_t n = dsp::frame_count(audio.samples.size(), spec);
  std::vector<SegmentLabel> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto state = audio.label_at(k * spec.hop + spec.frameLen / 2);
    out[k] = synth::is_pump_active(state) ? SegmentLabel::Active : SegmentLabel::Inactive;
  }
  return out;
}

TrainResult train_from_audio(std::span<const float> samples, double sampleRate,
                             const dsp::FrameSpec& spec, std::span<const dsp::Band> bands) {
  const FrameAnalysis fa = analyze_audio(samples, sampleRate, spec, bands);
  profiling::TrainingContext ctx;
  ctx.frameSpec = spec;
  ctx.sampleRate = sampleRate;
  ctx.bands.assign(bands.begin(), bands.end());
  ctx.segmentation = profiling::calibrate_thresholds(fa.activityRms);
  TrainResult r;
  r.segments = profiling::segment_activity(fa.activityRms, ctx.segmentation);
  r.db = profiling::train_profiles(fa.features, r.segments, ctx);
  return r;
}

DetectionResult detect_from_audio(std::span<const float> samples, double sampleRate,
                                  const profiling::ProfileDB& db,
                                  const detector::DetectionConfig& cfg) {
  if (sampleRate != db.sampleRate) {
    throw Mismatch(fmt::format("audio sample rate {} Hz does not match database {} Hz", sampleRate,
                               db.sampleRate));
  }
  const FrameAnalysis fa = analyze_audio(samples, sampleRate, db.frameSpec, db.bands);
  DetectionResult r;
  r.segments = profiling::segment_activity(fa.activityRms, db.segmentation);
  const auto labels = profiling::frame_labels(r.segments);
  std::vector<detector::LabeledFrame> stream(fa.features.size());
  for (std::size_t k = 0; k < stream.size(); ++k) stream[k] = {fa.features[k], labels[k]};
  r.alerts = detector::detect(stream, db, cfg, {sampleRate, db.frameSpec});
  return r;
}

std::vector<TruthEpisode> truth_episodes(const process::AttackScript& script) {
  std::vector<TruthEpisode> out;
  for (const auto& w : script.pumpOverrideWindows) out.push_back({"pump_override", w.start, w.end});
  for (const auto& w : script.valveOpenWindows) out.push_back({"valve_open", w.start, w.end});
  std::sort(out.begin(), out.end(),
            [](const TruthEpisode& a, const TruthEpisode& b) { return a.startS < b.startS; });
  return out;
}

Confusion match_episodes(std::span<const detector::Alert> alerts,
                         std::span<const TruthEpisode> truth, const dsp::FrameSpec& spec,
                         double sampleRate, std::size_t consecutiveFrames) {
  const double hopS = static_cast<double>(spec.hop) / sampleRate;
  const double frameS = static_cast<double>(spec.frameLen) / sampleRate;
  std::vector<bool> windowHit(truth.size(), false);
  Confusion c;
  for (const auto& a : alerts) {
    const double lo = a.timeS - static_cast<double>(consecutiveFrames - 1) * hopS;
    const double hi = a.timeS + frameS;
    bool matched = false;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (lo < truth[i].endS && truth[i].startS < hi) {
        windowHit[i] = true;
        matched = true;
      }
    }
    if (!matched) ++c.falsePositives;
  }
  for (bool hit : windowHit) {
    if (hit) {
      ++c.truePositives;
    } else {
      ++c.falseNegatives;
    }
  }
  return c;
}

RunReport build_report(const std::string& scenarioId, const DetectionResult& detection,
                       const process::AttackScript& script, const dsp::FrameSpec& spec,
                       double sampleRate, std::size_t consecutiveFrames) {
  RunReport r;
  r.scenarioId = scenarioId;
  for (const auto& s : detection.segments) {
    if (s.label == SegmentLabel::Active) {
      ++r.activeSegments;
    } else {
      ++r.inactiveSegments;
    }
  }
  r.alerts = detection.alerts;
  r.eventTruth = truth_episodes(script);
  r.confusion = match_episodes(r.alerts, r.eventTruth, spec, sampleRate, consecutiveFrames);
  return r;
}

std::string RunReport::to_text() const {
  std::string s;
  s += fmt::format("scenario: {}\n", scenarioId);
  s += fmt::format("segments: {} active, {} inactive\n", activeSegments, inactiveSegments);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& a : alerts) ++counts[static_cast<int>(a.verdict)];
  s += fmt::format("alerts: {} (Attack1Suspected {}, Attack2Suspected {}, UnknownAnomaly {})\n",
                   alerts.size(), counts[0], counts[1], counts[2]);
  for (const auto& a : alerts) {
    s += fmt::format("  t={:8.2f}s frame={:6d} label={:8} max_z={:7.2f} band={:5.0f}Hz {}\n",
                     a.timeS, a.frameIndex, profiling::to_string(a.label), a.maxZ,
                     a.offendingBandHz, detector::to_string(a.verdict));
  }
  s += fmt::format("truth episodes: {}\n", eventTruth.size());
  for (const auto& e : eventTruth) {
    s += fmt::format("  {:13} [{:.1f}, {:.1f}] s\n", e.kind, e.startS, e.endS);
  }
  s += fmt::format("episodes: TP={} FP={} FN={}\n", confusion.truePositives,
                   confusion.falsePositives, confusion.falseNegatives);
  return s;
}

SimulatedRun simulate_and_render(const ScenarioDoc& scenario) {
  scenario.validate();
  SimulatedRun run;
  run.trace = process::run_scenario(scenario.process, scenario.attacks, scenario.durationS);
  run.audio = synth::render_trace(run.trace, scenario.synth);
  quantize_pcm16(run.audio.samples);
  return run;
}

std::vector<ClassSpectrum> class_spectra(std::span<const float> samples, double sampleRate,
                                         std::span<const synth::LabelChange> labels,
                                         const dsp::FrameSpec& spec) {
  if (labels.empty()) throw InvalidArgument("label sidecar is empty");
  dsp::SpectrumAnalyzer analyzer(spec, sampleRate);
  const std::size_t n = dsp::frame_count(samples.size(), spec);
  const std::size_t nBins = spec.frameLen / 2 + 1;

  std::array<std::vector<double>, 4> sums;
  std::array<std::size_t, 4> counts{};
  std::size_t li = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint64_t b = k * spec.hop;
    const std::uint64_t e = b + spec.frameLen;
    while (li + 1 < labels.size() && labels[li + 1].sampleIndex <= b) ++li;
    // Skip frames that straddle a state change.
    if (li + 1 < labels.size() && labels[li + 1].sampleIndex < e) continue;
    const auto idx = static_cast<std::size_t>(labels[li].state);
    const auto ps = analyzer.analyze(samples, k);
    if (sums[idx].empty()) sums[idx].assign(nBins, 0.0);
    for (std::size_t j = 0; j < nBins; ++j) {
      sums[idx][j] += 10.0 * std::log10(ps.bins[j] + dsp::kEnergyFloor);
    }
    ++counts[idx];
  }

  std::vector<ClassSpectrum> out;
  for (synth::AcousticState s : synth::kAllAcousticStates) {
    const auto idx = static_cast<std::size_t>(s);
    if (counts[idx] == 0) continue;
    ClassSpectrum cs;
    cs.state = s;
    cs.frames = counts[idx];
    cs.binWidth = sampleRate / static_cast<double>(spec.frameLen);
    cs.meanDb = sums[idx];
    for (double& v : cs.meanDb) v /= static_cast<double>(counts[idx]);
    out.push_back(std::move(cs));
  }
  return out;
}

std::string spectrum_file_name(synth::AcousticState state) {
  return fmt::format("spectrum_{}.csv", synth::to_string(state));
}

E2EOutputs run_e2e(const ScenarioDoc& scenario, std::uint64_t seed,
                   const std::filesystem::path& outDir) {
  scenario.validate();
  std::filesystem::create_directories(outDir);
  E2EOutputs out;
  const auto rate = static_cast<std::uint32_t>(scenario.synth.sampleRate);

  ScenarioDoc training = scenario.without_attacks();
  training.synth.seed = seed;
  {
    const SimulatedRun run = simulate_and_render(training);
    write_trace_csv(outDir / "train_trace.csv", run.trace);
    out.trainWav = outDir / "train.wav";
    write_wav(out.trainWav, rate, run.audio.samples);
    write_labels_csv(outDir / "train_labels.csv", run.audio.labels);
    const TrainResult tr = train_from_audio(run.audio.samples, scenario.synth.sampleRate,
                                            scenario.frames);
    out.dbJson = outDir / "profiles.json";
    profiling::save_db(tr.db, out.dbJson);
  }

  ScenarioDoc monitored = scenario;
  monitored.synth.seed = seed + 1;
  const SimulatedRun run = simulate_and_render(monitored);
  write_trace_csv(outDir / "trace.csv", run.trace);
  out.detectWav = outDir / "audio.wav";
  write_wav(out.detectWav, rate, run.audio.samples);
  write_labels_csv(outDir / "labels.csv", run.audio.labels);

  const profiling::ProfileDB db = profiling::load_db(out.dbJson);
  const DetectionResult det =
      detect_from_audio(run.audio.samples, scenario.synth.sampleRate, db, scenario.detection);
  out.report = build_report(scenario.id, det, scenario.attacks, db.frameSpec, db.sampleRate,
                            scenario.detection.consecutiveFrames);
  out.alertsCsv = outDir / "alerts.csv";
  write_alerts_csv(out.alertsCsv, det.alerts);
  out.reportTxt = outDir / "report.txt";
  std::ofstream rep(out.reportTxt, std::ios::binary);
  rep << out.report.to_text();
  return out;
}

}  // namespace sidechan::harness
