#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "sidechan/acoustic_synth.hpp"
#include "sidechan/detector.hpp"
#include "sidechan/dsp.hpp"
#include "sidechan/process_sim.hpp"

namespace sidechan::harness {

inline constexpr double kMinScenarioDurationS = 60.0;

/// Everything needed to run the pipeline end to end.
struct ScenarioDoc {
  std::string id = "scenario";
  process::ProcessParams process;
  process::AttackScript attacks;
  synth::SynthConfig synth;
  dsp::FrameSpec frames;
  detector::DetectionConfig detection;
  double durationS = 1200.0;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  /// Same scenario with every attack window removed and spoofing off.
  ScenarioDoc without_attacks() const;
};

/// Parses scenario JSON; missing keys keep their defaults, wrong types and violated
/// constraints raise ConfigError.
ScenarioDoc parse_scenario(std::string_view json, std::string id = "scenario");
ScenarioDoc load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const ScenarioDoc& doc);

/// Default 20-minute attack-free run.
ScenarioDoc default_normal_scenario();

/// 20-minute run with one pump-override (dry run) episode and three valve-open episodes,
/// telemetry spoofed.
ScenarioDoc attack_scenario();

}  // namespace sidechan::harness
