#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "sidechan/error.hpp"
#include "sidechan/profiling.hpp"

using namespace sidechan;
using namespace sidechan::profiling;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "sidechan_profiling_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

TrainingContext context(std::size_t nBands = 3) {
  TrainingContext ctx;
  ctx.sampleRate = 48000.0;
  ctx.bands = dsp::default_bands();
  ctx.bands.resize(nBands);
  ctx.segmentation = {0.2, 0.05, 5};
  return ctx;
}

dsp::BandFeatures feat(double db, double r4 = 0.01, double r5 = 0.005, std::size_t nBands = 3) {
  dsp::BandFeatures f;
  f.logBandEnergies.assign(nBands, db);
  f.highBandRatio4k = r4;
  f.highBandRatio5k = r5;
  return f;
}

// Active frames [0, nActive), Inactive after.
std::vector<Segment> two_segments(std::size_t nActive, std::size_t nInactive) {
  return {{SegmentLabel::Active, 0, nActive}, {SegmentLabel::Inactive, nActive, nActive + nInactive}};
}

ProfileDB sample_db() {
  std::vector<dsp::BandFeatures> fs;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 120; ++i) {
    auto f = feat(i < 60 ? -13.0 : -86.0, 0.04 + 0.001 * g(rng), 0.03 + 0.001 * g(rng));
    for (auto& e : f.logBandEnergies) e += 2.0 * g(rng) + 1e-3 / 3.0;
    fs.push_back(f);
  }
  return train_profiles(fs, two_segments(60, 60), context());
}

std::vector<double> random_rms(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> rms(n);
  double level = 0.01;
  for (auto& r : rms) {
    if (u(rng) < 0.05) level = level > 0.05 ? 0.01 : 0.3;
    r = level * (0.5 + u(rng));
  }
  return rms;
}

}  // namespace

TEST(SegmentLabel, Names) {
  EXPECT_EQ(to_string(SegmentLabel::Active), "Active");
  EXPECT_EQ(parse_segment_label("inactive"), SegmentLabel::Inactive);
  EXPECT_EQ(parse_segment_label("Active"), SegmentLabel::Active);
  EXPECT_FALSE(parse_segment_label("idle").has_value());
}

TEST(SegmentActivity, ConstantLowIsOneInactiveSegment) {
  std::vector<double> rms(100, 0.01);
  const auto segs = segment_activity(rms, 0.2, 0.05, 5);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0], (Segment{SegmentLabel::Inactive, 0, 100}));
}

TEST(SegmentActivity, StepGivesBoundaryAtStep) {
  std::vector<double> rms(100, 0.01);
  for (std::size_t i = 40; i < 100; ++i) rms[i] = 1.0;
  const auto segs = segment_activity(rms, 0.2, 0.05, 5);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_NEAR(static_cast<double>(segs[1].startFrame), 40.0, 1.0);
  EXPECT_EQ(segs[1].label, SegmentLabel::Active);
}

TEST(SegmentActivity, HysteresisHoldsBetweenThresholds) {
  std::vector<double> rms{0.01, 0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.01, 0.1, 0.1, 0.1, 0.1, 0.1};
  const auto labels = frame_labels(segment_activity(rms, 0.2, 0.05, 1));
  ASSERT_EQ(labels.size(), rms.size());
  for (std::size_t i = 1; i < 7; ++i) EXPECT_EQ(labels[i], SegmentLabel::Active) << i;
  for (std::size_t i = 7; i < rms.size(); ++i) EXPECT_EQ(labels[i], SegmentLabel::Inactive) << i;
}

TEST(SegmentActivity, ShortRunMergesIntoPredecessor) {
  std::vector<double> rms(30, 0.01);
  rms[10] = rms[11] = 1.0;
  const auto segs = segment_activity(rms, 0.2, 0.05, 5);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].label, SegmentLabel::Inactive);
}

TEST(SegmentActivity, ShortLeadingRunMergesIntoSuccessor) {
  std::vector<double> rms(30, 0.01);
  rms[0] = rms[1] = 1.0;
  const auto segs = segment_activity(rms, 0.2, 0.05, 5);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0], (Segment{SegmentLabel::Inactive, 0, 30}));
}

TEST(SegmentActivity, PreconditionErrors) {
  std::vector<double> rms(10, 0.1);
  EXPECT_THROW(segment_activity({}, 0.2, 0.05, 5), InvalidArgument);
  EXPECT_THROW(segment_activity(rms, 0.05, 0.2, 5), ConfigError);
  EXPECT_THROW(segment_activity(rms, 0.2, 0.0, 5), ConfigError);
  EXPECT_THROW(segment_activity(rms, 0.2, 0.05, 0), ConfigError);
}

class SegmentationProperties : public ::testing::TestWithParam<int> {};

TEST_P(SegmentationProperties, TilesAndAlternates) {
  const auto rms = random_rms(2000, static_cast<std::uint64_t>(GetParam()));
  const auto segs = segment_activity(rms, 0.1, 0.03, 5);
  ASSERT_FALSE(segs.empty());
  EXPECT_EQ(segs.front().startFrame, 0u);
  EXPECT_EQ(segs.back().endFrame, rms.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    EXPECT_LT(segs[i].startFrame, segs[i].endFrame);
    total += segs[i].length();
    if (i > 0) {
      EXPECT_EQ(segs[i].startFrame, segs[i - 1].endFrame);
      EXPECT_NE(segs[i].label, segs[i - 1].label);
    }
  }
  EXPECT_EQ(total, rms.size());
}

TEST_P(SegmentationProperties, ScaleEquivariant) {
  const auto rms = random_rms(2000, static_cast<std::uint64_t>(GetParam()));
  const auto base = segment_activity(rms, 0.1, 0.03, 5);
  for (double scale : {0.25, 3.0, 1024.0}) {
    std::vector<double> scaled(rms);
    for (auto& r : scaled) r *= scale;
    EXPECT_EQ(segment_activity(scaled, 0.1 * scale, 0.03 * scale, 5), base) << scale;
  }
}

INSTANTIATE_TEST_SUITE_P(Randomised, SegmentationProperties, ::testing::Range(0, 8));

TEST(CalibrateThresholds, SplitsTwoLevels) {
  std::vector<double> rms;
  for (int c = 0; c < 6; ++c) {
    rms.insert(rms.end(), 100, 0.01);
    rms.insert(rms.end(), 20, 0.16);
  }
  const auto cfg = calibrate_thresholds(rms, 5);
  // Geometric midpoint of 0.01 and 0.16 is 0.04.
  EXPECT_NEAR(cfg.onThreshold, 0.08, 1e-12);
  EXPECT_NEAR(cfg.offThreshold, 0.02, 1e-12);
  EXPECT_EQ(cfg.minSegmentFrames, 5u);
}

TEST(CalibrateThresholds, SingleLevelIsInsufficient) {
  std::vector<double> rms(500, 0.01);
  EXPECT_THROW(calibrate_thresholds(rms), InsufficientData);
}

TEST(TrainProfiles, IdenticalFramesClampToFloor) {
  std::vector<dsp::BandFeatures> fs(120, feat(-20.0));
  const auto db = train_profiles(fs, two_segments(60, 60), context());
  for (const auto& p : db.profiles) {
    for (double s : p.stdLogBandEnergies) EXPECT_EQ(s, kStdFloorDb);
    for (double m : p.meanLogBandEnergies) EXPECT_EQ(m, -20.0);
  }
}

TEST(TrainProfiles, AlternatingValuesGiveMidpointAndPopulationStd) {
  // The four-frame pattern {10, 14, 10, 14} repeated 13 times.
  std::vector<dsp::BandFeatures> fs;
  for (int rep = 0; rep < 13; ++rep) {
    for (double v : {10.0, 14.0, 10.0, 14.0}) fs.push_back(feat(v, 0.1, 0.2));
  }
  for (int rep = 0; rep < 13; ++rep) {
    for (double v : {-50.0, -50.25, -50.0, -50.25}) fs.push_back(feat(v, 0.0, 0.0));
  }
  const auto db = train_profiles(fs, two_segments(52, 52), context());
  const auto& active = db.profile(SegmentLabel::Active);
  EXPECT_EQ(active.trainFrameCount, 52u);
  EXPECT_NEAR(active.meanLogBandEnergies[0], 12.0, 1e-12);
  EXPECT_NEAR(active.stdLogBandEnergies[0], 2.0, 1e-12);
  EXPECT_NEAR(active.meanHighRatio4k, 0.1, 1e-12);
  EXPECT_NEAR(active.meanHighRatio5k, 0.2, 1e-12);
  const auto& inactive = db.profile(SegmentLabel::Inactive);
  EXPECT_NEAR(inactive.meanLogBandEnergies[0], -50.125, 1e-12);
  EXPECT_EQ(inactive.stdLogBandEnergies[0], kStdFloorDb);
}

TEST(TrainProfiles, InsufficientFramesNamesLabel) {
  std::vector<dsp::BandFeatures> fs(80, feat(0.0));
  try {
    train_profiles(fs, two_segments(40, 40), context());
    FAIL() << "expected InsufficientData";
  } catch (const InsufficientData& e) {
    EXPECT_NE(std::string(e.what()).find("Active"), std::string::npos) << e.what();
  }
  try {
    train_profiles(fs, two_segments(75, 5), context());
    FAIL() << "expected InsufficientData";
  } catch (const InsufficientData& e) {
    EXPECT_NE(std::string(e.what()).find("Inactive"), std::string::npos) << e.what();
  }
}

TEST(TrainProfiles, SegmentPastEndOrBandMismatchThrows) {
  std::vector<dsp::BandFeatures> fs(120, feat(0.0));
  EXPECT_THROW(train_profiles(fs, two_segments(60, 70), context()), InvalidArgument);
  EXPECT_THROW(train_profiles(fs, two_segments(60, 60), context(2)), Mismatch);
}

TEST(TrainProfiles, Deterministic) { EXPECT_EQ(sample_db(), sample_db()); }

TEST(ProfileDb, JsonRoundTripIsExact) {
  const auto db = sample_db();
  EXPECT_EQ(db_from_json(db_to_json(db)), db);
}

TEST(ProfileDb, FileRoundTripIsExact) {
  const auto db = sample_db();
  const auto path = temp_path("roundtrip.json");
  save_db(db, path);
  EXPECT_EQ(load_db(path), db);
}

TEST(ProfileDb, TruncatedFileIsMalformed) {
  const auto text = db_to_json(sample_db());
  const auto path = temp_path("truncated.json");
  std::ofstream(path) << text.substr(0, text.size() / 2);
  EXPECT_THROW(load_db(path), FormatError);
}

TEST(ProfileDb, NewerVersionNamesBoth) {
  auto text = db_to_json(sample_db());
  const std::string from = "\"version\": 1";
  const auto pos = text.find(from);
  ASSERT_NE(pos, std::string::npos) << text.substr(0, 200);
  text.replace(pos, from.size(), "\"version\": 2");
  try {
    db_from_json(text);
    FAIL() << "expected VersionMismatch";
  } catch (const VersionMismatch& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('1'), std::string::npos) << msg;
    EXPECT_NE(msg.find('2'), std::string::npos) << msg;
  }
}

TEST(ProfileDb, MissingLabelIsMalformed) {
  auto text = db_to_json(sample_db());
  const auto pos = text.find("\"inactive\"");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 10, "\"dormant\"");
  EXPECT_THROW(db_from_json(text), FormatError);
}

TEST(ProfileDb, MissingFileIsIoError) {
  EXPECT_THROW(load_db(temp_path("does_not_exist.json")), IoError);
}
