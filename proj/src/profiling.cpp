#include "sidechan/profiling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "sidechan/error.hpp"

namespace sidechan::profiling {

using nlohmann::json;

namespace {

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

std::string_view label_key(SegmentLabel l) {
  return l == SegmentLabel::Active ? "active" : "inactive";
}

template <typename T>
T get_field(const json& obj, std::string_view key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(fmt::format("profile database: missing key '{}'", key));
  try {
    return it->template get<T>();
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("profile database: bad value for '{}': {}", key, e.what()));
  }
}

}  // namespace

std::string_view to_string(SegmentLabel l) {
  return l == SegmentLabel::Active ? "Active" : "Inactive";
}

std::optional<SegmentLabel> parse_segment_label(std::string_view name) {
  if (name == "Active" || name == "active") return SegmentLabel::Active;
  if (name == "Inactive" || name == "inactive") return SegmentLabel::Inactive;
  return std::nullopt;
}

void SegmentationConfig::validate() const {
  if (!(offThreshold > 0.0) || !(onThreshold > offThreshold)) {
    throw ConfigError("segmentation", fmt::format("need on > off > 0 (on={}, off={})", onThreshold,
                                                  offThreshold));
  }
  if (minSegmentFrames < 1) throw ConfigError("segmentation.min_segment_frames", "must be >= 1");
}

std::vector<Segment> segment_activity(std::span<const double> frameRms, double onThreshold,
                                      double offThreshold, std::size_t minSegmentFrames) {
  if (frameRms.empty()) throw InvalidArgument("segment_activity: empty RMS sequence");
  SegmentationConfig{onThreshold, offThreshold, minSegmentFrames}.validate();

  std::vector<Segment> runs;
  SegmentLabel current = SegmentLabel::Inactive;
  for (std::size_t k = 0; k < frameRms.size(); ++k) {
    const double r = frameRms[k];
    if (current == SegmentLabel::Inactive && r > onThreshold) {
      current = SegmentLabel::Active;
    } else if (current == SegmentLabel::Active && r < offThreshold) {
      current = SegmentLabel::Inactive;
    }
    if (runs.empty() || runs.back().label != current) {
      runs.push_back({current, k, k + 1});
    } else {
      runs.back().endFrame = k + 1;
    }
  }

  std::vector<Segment> out;
  for (const Segment& run : runs) {
    if (!out.empty() && (run.length() < minSegmentFrames || out.back().label == run.label)) {
      out.back().endFrame = run.endFrame;
    } else {
      out.push_back(run);
    }
  }
  if (out.size() > 1 && out.front().length() < minSegmentFrames) {
    out[1].startFrame = 0;
    out.erase(out.begin());
  }
  return out;
}

std::vector<SegmentLabel> frame_labels(std::span<const Segment> segments) {
  std::vector<SegmentLabel> labels;
  for (const auto& s : segments) labels.insert(labels.end(), s.length(), s.label);
  return labels;
}

SegmentationConfig calibrate_thresholds(std::span<const double> frameRms,
                                        std::size_t minSegmentFrames) {
  if (frameRms.size() < 2) throw InsufficientData("calibration needs at least two frames");
  std::vector<double> logs;
  logs.reserve(frameRms.size());
  for (double r : frameRms) logs.push_back(std::log(std::max(r, 1e-12)));
  std::sort(logs.begin(), logs.end());

  // Exact 1-D two-cluster split: minimise within-cluster sum of squares over all cut points.
  const std::size_t n = logs.size();
  std::vector<double> prefix(n + 1, 0.0);
  std::vector<double> prefixSq(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    prefix[i + 1] = prefix[i] + logs[i];
    prefixSq[i + 1] = prefixSq[i] + logs[i] * logs[i];
  }
  auto sse = [&](std::size_t b, std::size_t e) {
    const double cnt = static_cast<double>(e - b);
    const double s = prefix[e] - prefix[b];
    return (prefixSq[e] - prefixSq[b]) - s * s / cnt;
  };
  std::size_t bestCut = 1;
  double best = sse(0, 1) + sse(1, n);
  for (std::size_t cut = 2; cut < n; ++cut) {
    const double v = sse(0, cut) + sse(cut, n);
    if (v < best) {
      best = v;
      bestCut = cut;
    }
  }
  const double quiet = std::exp(median_of({logs.begin(), logs.begin() + static_cast<std::ptrdiff_t>(bestCut)}));
  const double loud = std::exp(median_of({logs.begin() + static_cast<std::ptrdiff_t>(bestCut), logs.end()}));
  if (!(loud > 4.0 * quiet)) {
    throw InsufficientData(fmt::format(
        "cannot separate active and inactive frames (cluster medians {} and {})", quiet, loud));
  }
  const double midpoint = std::sqrt(quiet * loud);
  return SegmentationConfig{2.0 * midpoint, 0.5 * midpoint, minSegmentFrames};
}

ProfileDB train_profiles(std::span<const dsp::BandFeatures> features,
                         std::span<const Segment> segments, const TrainingContext& context) {
  const std::size_t nBands = context.bands.size();
  ProfileDB db;
  db.frameSpec = context.frameSpec;
  db.sampleRate = context.sampleRate;
  db.bands = context.bands;
  db.segmentation = context.segmentation;

  for (SegmentLabel label : {SegmentLabel::Active, SegmentLabel::Inactive}) {
    std::vector<double> sum(nBands, 0.0);
    std::size_t count = 0;
    double r4 = 0.0;
    double r5 = 0.0;
    auto for_each_frame = [&](auto&& fn) {
      for (const Segment& s : segments) {
        if (s.label != label) continue;
        if (s.endFrame > features.size()) {
          throw InvalidArgument(fmt::format("segment [{}, {}) exceeds {} feature frames", s.startFrame,
                                            s.endFrame, features.size()));
        }
        for (std::size_t k = s.startFrame; k < s.endFrame; ++k) fn(features[k]);
      }
    };
    for_each_frame([&](const dsp::BandFeatures& f) {
      if (f.logBandEnergies.size() != nBands) {
        throw Mismatch(fmt::format("feature frame has {} bands, expected {}",
                                   f.logBandEnergies.size(), nBands));
      }
      for (std::size_t i = 0; i < nBands; ++i) sum[i] += f.logBandEnergies[i];
      r4 += f.highBandRatio4k;
      r5 += f.highBandRatio5k;
      ++count;
    });
    if (count < kMinTrainFrames) {
      throw InsufficientData(fmt::format("label {} has {} training frames, need at least {}",
                                         to_string(label), count, kMinTrainFrames));
    }
    const double n = static_cast<double>(count);
    AcousticProfile& p = db.profiles[static_cast<std::size_t>(label)];
    p.label = label;
    p.trainFrameCount = count;
    p.meanHighRatio4k = r4 / n;
    p.meanHighRatio5k = r5 / n;
    p.meanLogBandEnergies.resize(nBands);
    for (std::size_t i = 0; i < nBands; ++i) p.meanLogBandEnergies[i] = sum[i] / n;

    // Population std, second pass for stability.
    std::vector<double> sq(nBands, 0.0);
    for_each_frame([&](const dsp::BandFeatures& f) {
      for (std::size_t i = 0; i < nBands; ++i) {
        const double d = f.logBandEnergies[i] - p.meanLogBandEnergies[i];
        sq[i] += d * d;
      }
    });
    p.stdLogBandEnergies.resize(nBands);
    for (std::size_t i = 0; i < nBands; ++i) {
      p.stdLogBandEnergies[i] = std::max(std::sqrt(sq[i] / n), kStdFloorDb);
    }
  }
  return db;
}

std::string db_to_json(const ProfileDB& db) {
  json doc;
  doc["version"] = db.version;
  doc["sample_rate"] = db.sampleRate;
  doc["frame_len"] = db.frameSpec.frameLen;
  doc["hop"] = db.frameSpec.hop;
  doc["window"] = std::string(dsp::to_string(db.frameSpec.window));
  json bands = json::array();
  for (const auto& b : db.bands) bands.push_back({b.centerHz, b.halfWidthHz});
  doc["bands"] = bands;
  doc["segmentation"] = {{"on_threshold", db.segmentation.onThreshold},
                         {"off_threshold", db.segmentation.offThreshold},
                         {"min_segment_frames", db.segmentation.minSegmentFrames}};
  json profiles = json::object();
  for (const auto& p : db.profiles) {
    profiles[std::string(label_key(p.label))] = {{"mean_db", p.meanLogBandEnergies},
                                                 {"std_db", p.stdLogBandEnergies},
                                                 {"ratio4k", p.meanHighRatio4k},
                                                 {"ratio5k", p.meanHighRatio5k},
                                                 {"frames", p.trainFrameCount}};
  }
  doc["profiles"] = profiles;
  // nlohmann emits doubles with max_digits10 (17 significant digits).
  return doc.dump(2) + "\n";
}

ProfileDB db_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(fmt::format("profile database: malformed document: {}", e.what()));
  }
  if (!doc.is_object()) throw FormatError("profile database: top level must be an object");

  ProfileDB db;
  const int version = get_field<int>(doc, "version");
  if (version != kDbVersion) throw VersionMismatch(kDbVersion, version);
  db.version = version;
  db.sampleRate = get_field<double>(doc, "sample_rate");
  db.frameSpec.frameLen = get_field<std::size_t>(doc, "frame_len");
  db.frameSpec.hop = get_field<std::size_t>(doc, "hop");
  if (doc.contains("window")) {
    try {
      db.frameSpec.window = dsp::parse_window(get_field<std::string>(doc, "window"));
    } catch (const ConfigError& e) {
      throw FormatError(std::string("profile database: ") + e.what());
    }
  }
  for (const auto& b : get_field<std::vector<std::array<double, 2>>>(doc, "bands")) {
    db.bands.push_back({b[0], b[1]});
  }
  if (doc.contains("segmentation")) {
    const json& seg = doc["segmentation"];
    db.segmentation.onThreshold = get_field<double>(seg, "on_threshold");
    db.segmentation.offThreshold = get_field<double>(seg, "off_threshold");
    db.segmentation.minSegmentFrames = get_field<std::size_t>(seg, "min_segment_frames");
  }
  const json profiles = get_field<json>(doc, "profiles");
  for (SegmentLabel label : {SegmentLabel::Active, SegmentLabel::Inactive}) {
    const auto it = profiles.find(label_key(label));
    if (it == profiles.end()) {
      throw FormatError(fmt::format("profile database: missing label '{}'", label_key(label)));
    }
    AcousticProfile& p = db.profiles[static_cast<std::size_t>(label)];
    p.label = label;
    p.meanLogBandEnergies = get_field<std::vector<double>>(*it, "mean_db");
    p.stdLogBandEnergies = get_field<std::vector<double>>(*it, "std_db");
    p.meanHighRatio4k = get_field<double>(*it, "ratio4k");
    p.meanHighRatio5k = get_field<double>(*it, "ratio5k");
    p.trainFrameCount = get_field<std::size_t>(*it, "frames");
    if (p.meanLogBandEnergies.size() != db.bands.size() ||
        p.stdLogBandEnergies.size() != db.bands.size()) {
      throw FormatError(fmt::format("profile database: '{}' vectors do not match {} bands",
                                    label_key(label), db.bands.size()));
    }
  }
  return db;
}

void save_db(const ProfileDB& db, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << db_to_json(db);
  if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

ProfileDB load_db(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open profile database '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return db_from_json(ss.str());
}

}  // namespace sidechan::profiling
