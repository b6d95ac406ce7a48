#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sidechan/dsp.hpp"

namespace sidechan::profiling {

enum class SegmentLabel { Active, Inactive };

std::string_view to_string(SegmentLabel l);
std::optional<SegmentLabel> parse_segment_label(std::string_view name);

struct Segment {
  SegmentLabel label = SegmentLabel::Inactive;
  std::size_t startFrame = 0;
  std::size_t endFrame = 0;  // exclusive

  std::size_t length() const noexcept { return endFrame - startFrame; }
  bool operator==(const Segment&) const = default;
};

struct SegmentationConfig {
  double onThreshold = 0.0;
  double offThreshold = 0.0;
  std::size_t minSegmentFrames = 5;

  void validate() const;
  bool operator==(const SegmentationConfig&) const = default;
};

/// Lower and upper edge of the band whose RMS drives activity segmentation.
inline constexpr double kActivityBandLowHz = 0.0;
inline constexpr double kActivityBandHighHz = 2000.0;

/// Two-threshold hysteresis labelling of frame RMS. Runs shorter than `minSegmentFrames`
/// are absorbed by their predecessor (a short leading run by its successor).
std::vector<Segment> segment_activity(std::span<const double> frameRms, double onThreshold,
                                      double offThreshold, std::size_t minSegmentFrames);

inline std::vector<Segment> segment_activity(std::span<const double> frameRms,
                                             const SegmentationConfig& cfg) {
  return segment_activity(frameRms, cfg.onThreshold, cfg.offThreshold, cfg.minSegmentFrames);
}

std::vector<SegmentLabel> frame_labels(std::span<const Segment> segments);

/// Derives thresholds from an unlabelled RMS sequence: log-RMS values are split into a quiet
/// and a loud cluster, and the thresholds are 2x / 0.5x the geometric midpoint of the two
/// cluster medians. Throws InsufficientData when the sequence shows only one level.
SegmentationConfig calibrate_thresholds(std::span<const double> frameRms,
                                        std::size_t minSegmentFrames = 5);

inline constexpr double kStdFloorDb = 0.5;
inline constexpr std::size_t kMinTrainFrames = 50;
inline constexpr int kDbVersion = 1;

struct AcousticProfile {
  SegmentLabel label = SegmentLabel::Inactive;
  std::vector<double> meanLogBandEnergies;
  std::vector<double> stdLogBandEnergies;
  double meanHighRatio4k = 0.0;
  double meanHighRatio5k = 0.0;
  std::size_t trainFrameCount = 0;

  bool operator==(const AcousticProfile&) const = default;
};

struct ProfileDB {
  int version = kDbVersion;
  dsp::FrameSpec frameSpec;
  double sampleRate = 0.0;
  std::vector<dsp::Band> bands;
  SegmentationConfig segmentation;
  std::array<AcousticProfile, 2> profiles{};  // indexed by SegmentLabel

  const AcousticProfile& profile(SegmentLabel l) const {
    return profiles[static_cast<std::size_t>(l)];
  }
  bool operator==(const ProfileDB&) const = default;
};

/// Analysis context recorded alongside the trained profiles.
struct TrainingContext {
  dsp::FrameSpec frameSpec;
  double sampleRate = 0.0;
  std::vector<dsp::Band> bands;
  SegmentationConfig segmentation;
};

/// Per-label mean / population std of log band energies and mean cutoff ratios.
/// Throws InsufficientData naming the label that has fewer than 50 frames.
ProfileDB train_profiles(std::span<const dsp::BandFeatures> features,
                         std::span<const Segment> segments, const TrainingContext& context);

void save_db(const ProfileDB& db, const std::filesystem::path& path);
ProfileDB load_db(const std::filesystem::path& path);

std::string db_to_json(const ProfileDB& db);
ProfileDB db_from_json(std::string_view text);

}  // namespace sidechan::profiling
