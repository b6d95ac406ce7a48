#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "sidechan/dsp.hpp"
#include "sidechan/profiling.hpp"

namespace sidechan::detector {

using profiling::SegmentLabel;

struct DetectionConfig {
  double zThreshold = 3.0;
  std::size_t consecutiveFrames = 5;
  double ratioMargin = 0.15;

  void validate() const;
};

enum class Verdict { Attack1Suspected, Attack2Suspected, UnknownAnomaly };

std::string_view to_string(Verdict v);

struct Alert {
  std::size_t frameIndex = 0;
  double timeS = 0.0;  // start time of the triggering frame
  SegmentLabel label = SegmentLabel::Inactive;
  double maxZ = 0.0;
  double offendingBandHz = 0.0;
  Verdict verdict = Verdict::UnknownAnomaly;
};

struct LabeledFrame {
  dsp::BandFeatures features;
  SegmentLabel label = SegmentLabel::Inactive;
};

/// Analysis parameters of the stream being scored; must match the database.
struct StreamInfo {
  double sampleRate = 0.0;
  dsp::FrameSpec frameSpec;
};

/// Signed per-band z-scores against a profile.
std::vector<double> score_frame(const dsp::BandFeatures& f, const profiling::AcousticProfile& profile);

struct AlertContext {
  SegmentLabel label = SegmentLabel::Inactive;
  double meanRatio4k = 0.0;
  double meanRatio5k = 0.0;
};

Verdict classify(const AlertContext& ctx, const profiling::AcousticProfile& normalProfile,
                 const DetectionConfig& cfg);

/// Debounced episode detection: one alert at the k-th consecutive frame whose max |z| exceeds
/// the threshold, then silence until that run of exceedances ends.
std::vector<Alert> detect(std::span<const LabeledFrame> stream, const profiling::ProfileDB& db,
                          const DetectionConfig& cfg, const StreamInfo& info);

}  // namespace sidechan::detector
