#include "sidechan/detector.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sidechan/error.hpp"

namespace sidechan::detector {

void DetectionConfig::validate() const {
  if (!(zThreshold > 0.0) || !std::isfinite(zThreshold)) {
    throw ConfigError("detect.z_threshold", fmt::format("must be > 0 (got {})", zThreshold));
  }
  if (consecutiveFrames < 1) throw ConfigError("detect.consecutive", "must be >= 1");
  if (!(ratioMargin > 0.0 && ratioMargin < 1.0)) {
    throw ConfigError("detect.ratio_margin", fmt::format("must be in (0, 1) (got {})", ratioMargin));
  }
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Attack1Suspected: return "Attack1Suspected";
    case Verdict::Attack2Suspected: return "Attack2Suspected";
    case Verdict::UnknownAnomaly: return "UnknownAnomaly";
  }
  return "UnknownAnomaly";
}

std::vector<double> score_frame(const dsp::BandFeatures& f,
                                const profiling::AcousticProfile& profile) {
  const std::size_t n = profile.meanLogBandEnergies.size();
  if (f.logBandEnergies.size() != n || profile.stdLogBandEnergies.size() != n) {
    throw Mismatch(fmt::format("frame has {} bands, profile has {}", f.logBandEnergies.size(), n));
  }
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = (f.logBandEnergies[i] - profile.meanLogBandEnergies[i]) / profile.stdLogBandEnergies[i];
  }
  return z;
}

Verdict classify(const AlertContext& ctx, const profiling::AcousticProfile& normalProfile,
                 const DetectionConfig& cfg) {
  if (ctx.label == SegmentLabel::Active &&
      ctx.meanRatio4k > normalProfile.meanHighRatio4k + cfg.ratioMargin) {
    return Verdict::Attack1Suspected;
  }
  if (ctx.label == SegmentLabel::Inactive &&
      ctx.meanRatio5k > normalProfile.meanHighRatio5k + cfg.ratioMargin) {
    return Verdict::Attack2Suspected;
  }
  return Verdict::UnknownAnomaly;
}

std::vector<Alert> detect(std::span<const LabeledFrame> stream, const profiling::ProfileDB& db,
                          const DetectionConfig& cfg, const StreamInfo& info) {
  cfg.validate();
  if (info.sampleRate != db.sampleRate) {
    throw Mismatch(fmt::format("stream sample rate {} Hz does not match database {} Hz",
                               info.sampleRate, db.sampleRate));
  }
  if (!(info.frameSpec == db.frameSpec)) {
    throw Mismatch(fmt::format("stream frames (len {}, hop {}) do not match database (len {}, hop {})",
                               info.frameSpec.frameLen, info.frameSpec.hop, db.frameSpec.frameLen,
                               db.frameSpec.hop));
  }

  struct Scored {
    std::vector<double> absZ;
    double maxAbs = 0.0;
  };

  std::vector<Alert> alerts;
  std::vector<Scored> window;  // most recent run of exceeding frames, capped at k
  std::size_t runLength = 0;
  for (std::size_t k = 0; k < stream.size(); ++k) {
    const LabeledFrame& frame = stream[k];
    auto z = score_frame(frame.features, db.profile(frame.label));
    Scored s;
    s.absZ.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      s.absZ[i] = std::abs(z[i]);
      s.maxAbs = std::max(s.maxAbs, s.absZ[i]);
    }
    if (!(s.maxAbs > cfg.zThreshold)) {
      runLength = 0;
      window.clear();
      continue;
    }
    ++runLength;
    if (runLength > cfg.consecutiveFrames) continue;  // episode already reported
    window.push_back(std::move(s));
    if (runLength < cfg.consecutiveFrames) continue;

    const std::size_t first = k + 1 - cfg.consecutiveFrames;
    const std::size_t nBands = db.bands.size();
    std::vector<double> meanAbs(nBands, 0.0);
    double maxZ = 0.0;
    for (const auto& w : window) {
      for (std::size_t i = 0; i < nBands; ++i) meanAbs[i] += w.absZ[i];
      maxZ = std::max(maxZ, w.maxAbs);
    }
    const auto worst = static_cast<std::size_t>(
        std::max_element(meanAbs.begin(), meanAbs.end()) - meanAbs.begin());

    AlertContext ctx;
    ctx.label = frame.label;
    for (std::size_t j = first; j <= k; ++j) {
      ctx.meanRatio4k += stream[j].features.highBandRatio4k;
      ctx.meanRatio5k += stream[j].features.highBandRatio5k;
    }
    ctx.meanRatio4k /= static_cast<double>(cfg.consecutiveFrames);
    ctx.meanRatio5k /= static_cast<double>(cfg.consecutiveFrames);

    Alert a;
    a.frameIndex = k;
    a.timeS = static_cast<double>(k * info.frameSpec.hop) / info.sampleRate;
    a.label = frame.label;
    a.maxZ = maxZ;
    a.offendingBandHz = db.bands[worst].centerHz;
    a.verdict = classify(ctx, db.profile(frame.label), cfg);
    alerts.push_back(a);
    window.clear();
  }
  return alerts;
}

}  // namespace sidechan::detector
