// sidechan: simulate, synthesize, train and detect on the acoustic side channel of a
// two-container pump process.
//
// Exit status: 0 clean, 1 operational error, 2 alerts raised.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sidechan/error.hpp"
#include "sidechan/harness/csv_io.hpp"
#include "sidechan/harness/pipeline.hpp"
#include "sidechan/harness/scenario.hpp"
#include "sidechan/harness/wav.hpp"

namespace fs = std::filesystem;
using namespace sidechan;

namespace {

constexpr int kExitClean = 0;
constexpr int kExitError = 1;
constexpr int kExitAlerts = 2;

struct Options {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string trace;
  std::string wav;
  std::string labels;
  std::string db;
};

harness::ScenarioDoc scenario_from(const Options& o) {
  harness::ScenarioDoc sc = o.scenario.empty() ? harness::default_normal_scenario()
                                               : harness::load_scenario(o.scenario);
  if (o.seed) sc.synth.seed = *o.seed;
  return sc;
}

void print_windows(const char* name, const std::vector<process::TimeWindow>& ws) {
  fmt::print("  {}: {} window(s)", name, ws.size());
  for (const auto& w : ws) fmt::print(" [{}, {}]", w.start, w.end);
  fmt::print("\n");
}

int cmd_simulate(const Options& o) {
  const auto sc = scenario_from(o);
  const auto trace = process::run_scenario(sc.process, sc.attacks, sc.durationS);
  fs::create_directories(o.out);
  const fs::path path = fs::path(o.out) / "trace.csv";
  harness::write_trace_csv(path, trace);

  std::size_t cycles = 0;
  bool prev = false;
  for (const auto& f : trace) {
    if (f.trueState.pumpOn && !prev) ++cycles;
    prev = f.trueState.pumpOn;
  }
  fmt::print("wrote {} ({} ticks, {:.1f} s)\n", path.string(), trace.size(), trace.back().t);
  fmt::print("pump cycles: {}\n", cycles);
  fmt::print("attacks (telemetry spoofing {}):\n", sc.attacks.spoofTelemetry ? "on" : "off");
  print_windows("pump_override", sc.attacks.pumpOverrideWindows);
  print_windows("valve_open", sc.attacks.valveOpenWindows);
  return kExitClean;
}

int cmd_synth(const Options& o) {
  const auto sc = scenario_from(o);
  const auto trace = harness::read_trace_csv(o.trace);
  if (trace.empty()) throw Mismatch("trace is empty");
  const std::size_t expected = process::tick_count(sc.durationS, sc.process.dt);
  const double dt = trace.size() > 1 ? trace[1].t - trace[0].t : trace[0].t;
  if (trace.size() != expected || std::abs(dt - sc.process.dt) > 1e-9) {
    throw Mismatch(fmt::format("trace ({} ticks, dt {}) does not match scenario ({} ticks, dt {})",
                               trace.size(), dt, expected, sc.process.dt));
  }
  const auto audio = synth::render_trace(trace, sc.synth);
  fs::create_directories(o.out);
  const fs::path wav = fs::path(o.out) / "audio.wav";
  const fs::path labels = fs::path(o.out) / "labels.csv";
  harness::write_wav(wav, static_cast<std::uint32_t>(sc.synth.sampleRate), audio.samples);
  harness::write_labels_csv(labels, audio.labels);
  fmt::print("wrote {} ({} samples at {} Hz) and {} ({} state changes)\n", wav.string(),
             audio.samples.size(), sc.synth.sampleRate, labels.string(), audio.labels.size());
  return kExitClean;
}

int cmd_train(const Options& o) {
  const auto sc = scenario_from(o);
  if (sc.attacks.has_attacks()) {
    fmt::print(stderr,
               "warning: scenario '{}' contains attack windows; training assumes attack-free "
               "audio\n",
               sc.id);
  }
  const auto wav = harness::read_wav(o.wav);
  if (wav.sampleRate != sc.synth.sampleRate) {
    throw Mismatch(fmt::format("WAV rate {} Hz does not match scenario rate {} Hz", wav.sampleRate,
                               sc.synth.sampleRate));
  }
  const auto result = harness::train_from_audio(wav.samples, wav.sampleRate, sc.frames);
  fs::create_directories(o.out);
  const fs::path path = fs::path(o.out) / "profiles.json";
  profiling::save_db(result.db, path);
  fmt::print("wrote {}: {} active frames, {} inactive frames, {} segments\n", path.string(),
             result.db.profile(profiling::SegmentLabel::Active).trainFrameCount,
             result.db.profile(profiling::SegmentLabel::Inactive).trainFrameCount,
             result.segments.size());
  return kExitClean;
}

int cmd_detect(const Options& o) {
  const auto db = profiling::load_db(o.db);
  const auto sc = scenario_from(o);
  const auto wav = harness::read_wav(o.wav);
  const auto det = harness::detect_from_audio(wav.samples, wav.sampleRate, db, sc.detection);
  const auto report = harness::build_report(sc.id, det, sc.attacks, db.frameSpec, db.sampleRate,
                                            sc.detection.consecutiveFrames);
  fs::create_directories(o.out);
  harness::write_alerts_csv(fs::path(o.out) / "alerts.csv", det.alerts);
  std::ofstream(fs::path(o.out) / "report.txt", std::ios::binary) << report.to_text();
  fmt::print("{}", report.to_text());
  return det.alerts.empty() ? kExitClean : kExitAlerts;
}

int cmd_spectra(const Options& o) {
  const auto sc = scenario_from(o);
  const auto wav = harness::read_wav(o.wav);
  const auto labels = harness::read_labels_csv(o.labels);
  const auto spectra = harness::class_spectra(wav.samples, wav.sampleRate, labels, sc.frames);
  fs::create_directories(o.out);
  for (const auto& cs : spectra) {
    const fs::path path = fs::path(o.out) / harness::spectrum_file_name(cs.state);
    harness::write_spectrum_csv(path, cs.binWidth, cs.meanDb);
    fmt::print("wrote {} ({} frames)\n", path.string(), cs.frames);
  }
  return kExitClean;
}

int cmd_e2e(const Options& o) {
  const auto sc = scenario_from(o);
  const auto out = harness::run_e2e(sc, sc.synth.seed, o.out);
  fmt::print("{}", out.report.to_text());
  return out.report.alerts.empty() ? kExitClean : kExitAlerts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acoustic side-channel intrusion detection workbench"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "Scenario JSON document");
    sub->add_option("--seed", o.seed, "Override the synthesis seed");
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
  };

  auto* simulate = app.add_subcommand("simulate", "Run the process simulation, write trace.csv");
  add_common(simulate);

  auto* synth = app.add_subcommand("synth", "Render a trace to audio.wav + labels.csv");
  add_common(synth);
  synth->add_option("--trace", o.trace, "Trace CSV from `simulate`")->required();

  auto* train = app.add_subcommand("train", "Build the known-good profile database");
  add_common(train);
  train->add_option("--wav", o.wav, "Attack-free PCM16 mono WAV")->required();

  auto* detect = app.add_subcommand("detect", "Score audio against a profile database");
  add_common(detect);
  detect->add_option("--db", o.db, "Profile database JSON")->required();
  detect->add_option("--wav", o.wav, "PCM16 mono WAV to monitor")->required();

  auto* spectra = app.add_subcommand("spectra", "Export averaged spectra per acoustic state");
  add_common(spectra);
  spectra->add_option("--wav", o.wav, "PCM16 mono WAV")->required();
  spectra->add_option("--labels", o.labels, "Label sidecar CSV from `synth`")->required();

  auto* e2e = app.add_subcommand("e2e", "simulate -> synth -> train -> detect -> report");
  add_common(e2e);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitClean : kExitError;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*synth) return cmd_synth(o);
    if (*train) return cmd_train(o);
    if (*detect) return cmd_detect(o);
    if (*spectra) return cmd_spectra(o);
    if (*e2e) return cmd_e2e(o);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitError;
  }
  return kExitError;
}
