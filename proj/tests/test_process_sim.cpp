#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sidechan/error.hpp"
#include "sidechan/process_sim.hpp"

using namespace sidechan;
using namespace sidechan::process;

namespace {

// Independent one-step calculator: works in levels directly (no volumes, no clamping branch).
struct EulerStep {
  double dLevelC1;
  double dLevelC2;
};

EulerStep hand_euler(double pumpFlow, double reflow, double areaC1, double areaC2, double dt) {
  const double net = (pumpFlow - reflow) * dt;
  return {-net / areaC1, net / areaC2};
}

ProcessState make_state(double c1, double c2, bool pump = false) {
  ProcessState s;
  s.levelC1 = c1;
  s.levelC2 = c2;
  s.pumpOn = pump;
  return s;
}

}  // namespace

TEST(ControlStep, UpperThresholdForcesOff) {
  ProcessParams p;
  EXPECT_FALSE(control_step(make_state(10, p.thresholdHigh, true), p));
}

TEST(ControlStep, LowerThresholdForcesOn) {
  ProcessParams p;
  EXPECT_TRUE(control_step(make_state(10, p.thresholdHigh - p.hysteresis, false), p));
}

TEST(ControlStep, HysteresisMemoryInsideBand) {
  ProcessParams p;
  EXPECT_TRUE(control_step(make_state(10, 9.0, true), p));
  EXPECT_FALSE(control_step(make_state(10, 9.0, false), p));
}

TEST(Integrate, EulerStepMatchesHandCalculation) {
  ProcessParams p;
  p.pumpFlow = 10.0;
  p.reflowNatural = 2.0;
  p.reflowValveOpen = 4.0;
  p.areaC1 = 50.0;
  p.areaC2 = 100.0;
  p.dt = 1.0;
  const ProcessState s = make_state(20.0, 5.0);
  const ProcessState next = integrate(s, true, p);

  const EulerStep expect = hand_euler(10.0, 2.0, 50.0, 100.0, 1.0);
  EXPECT_NEAR(next.levelC2 - s.levelC2, 0.08, 1e-12);
  EXPECT_NEAR(next.levelC2 - s.levelC2, expect.dLevelC2, 1e-12);
  EXPECT_NEAR(next.levelC1 - s.levelC1, -0.08 * (p.areaC2 / p.areaC1), 1e-12);
  EXPECT_NEAR(next.levelC1 - s.levelC1, expect.dLevelC1, 1e-12);
  EXPECT_DOUBLE_EQ(next.t, 1.0);
  EXPECT_FALSE(next.pumpDry);
}

TEST(Integrate, ValveOpenUsesIncreasedReflow) {
  ProcessParams p;
  ProcessState s = make_state(15.0, 9.0);
  s.valveOpen = true;
  const ProcessState next = integrate(s, false, p);
  const EulerStep expect = hand_euler(0.0, p.reflowValveOpen, p.areaC1, p.areaC2, p.dt);
  EXPECT_NEAR(next.levelC2 - s.levelC2, expect.dLevelC2, 1e-12);
  EXPECT_NEAR(next.levelC1 - s.levelC1, expect.dLevelC1, 1e-12);
}

TEST(Integrate, PumpOffConservesVolume) {
  ProcessParams p;
  const ProcessState s = make_state(15.0, 9.0);
  const ProcessState next = integrate(s, false, p);
  EXPECT_LT(next.levelC2, s.levelC2);
  EXPECT_NEAR(next.volume(p), s.volume(p), 1e-9 * s.volume(p));
}

TEST(Integrate, DryPumpTransfersNothing) {
  ProcessParams p;
  const ProcessState s = make_state(0.0, 12.0);
  const ProcessState next = integrate(s, true, p);
  EXPECT_TRUE(next.pumpDry);
  EXPECT_TRUE(next.pumpOn);
  EXPECT_EQ(next.levelC1, 0.0);
  EXPECT_DOUBLE_EQ(next.levelC2, s.levelC2);
}

TEST(Integrate, NonFiniteLevelIsRejected) {
  ProcessParams p;
  EXPECT_THROW(integrate(make_state(NAN, 1.0), true, p), CorruptState);
  EXPECT_THROW(integrate(make_state(1.0, INFINITY), true, p), CorruptState);
}

TEST(Integrate, LevelsNeverNegative) {
  ProcessParams p;
  ProcessState s = make_state(0.01, 0.01);
  s.valveOpen = true;
  const ProcessState next = integrate(s, true, p);
  EXPECT_GE(next.levelC1, 0.0);
  EXPECT_GE(next.levelC2, 0.0);
}

TEST(ApplyAttack, OverrideForcesPumpOn) {
  AttackScript script;
  script.pumpOverrideWindows = {{10.0, 20.0}};
  const auto cmd = apply_attack(false, script, 15.0);
  EXPECT_TRUE(cmd.pumpOn);
  EXPECT_FALSE(cmd.valveOpen);
}

TEST(ApplyAttack, ValveWindowOpensValve) {
  AttackScript script;
  script.valveOpenWindows = {{10.0, 20.0}};
  EXPECT_TRUE(apply_attack(false, script, 10.0).valveOpen);
  EXPECT_FALSE(apply_attack(false, script, 20.0).valveOpen);
}

TEST(ApplyAttack, OutsideWindowsIsIdentity) {
  AttackScript script;
  script.pumpOverrideWindows = {{10.0, 20.0}};
  script.valveOpenWindows = {{30.0, 40.0}};
  for (bool c : {false, true}) {
    const auto cmd = apply_attack(c, script, 25.0);
    EXPECT_EQ(cmd.pumpOn, c);
    EXPECT_FALSE(cmd.valveOpen);
  }
}

TEST(AttackScript, RejectsOverlapAndEmptyWindows) {
  AttackScript s;
  s.valveOpenWindows = {{10.0, 20.0}, {15.0, 25.0}};
  EXPECT_THROW(s.validate(), ConfigError);
  s.valveOpenWindows = {{10.0, 10.0}};
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(ReportTelemetry, NoSpoofReportsTruth) {
  AttackScript script;
  ProcessState t = make_state(3.0, 4.0, true);
  ProcessState shadow = make_state(5.0, 6.0, false);
  const auto f = report_telemetry(t, shadow, script);
  EXPECT_EQ(f.reportedState, t);
}

TEST(ReportTelemetry, TimeMismatchIsHarnessBug) {
  AttackScript script;
  ProcessState t = make_state(3.0, 4.0);
  ProcessState shadow = t;
  shadow.t = 0.1;
  EXPECT_THROW(report_telemetry(t, shadow, script), Mismatch);
}

TEST(ReportTelemetry, SpoofedRunReportsNominalCycle) {
  ProcessParams p;
  AttackScript script;
  script.spoofTelemetry = true;
  script.pumpOverrideWindows = {{60.0, 120.0}};
  const auto trace = run_scenario(p, script, 180.0);
  const auto nominal = run_scenario(p, AttackScript{}, 180.0);
  double maxDivergence = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    EXPECT_EQ(trace[i].reportedState, nominal[i].trueState);
    maxDivergence = std::max(maxDivergence,
                             std::abs(trace[i].trueState.levelC2 - trace[i].reportedState.levelC2));
  }
  EXPECT_GT(maxDivergence, 5.0);
}

TEST(ReportTelemetry, SpoofWithoutAttackEqualsTruth) {
  ProcessParams p;
  AttackScript script;
  script.spoofTelemetry = true;
  for (const auto& f : run_scenario(p, script, 120.0)) {
    EXPECT_NEAR(f.reportedState.levelC1, f.trueState.levelC1, 1e-9);
    EXPECT_NEAR(f.reportedState.levelC2, f.trueState.levelC2, 1e-9);
    EXPECT_EQ(f.reportedState.pumpOn, f.trueState.pumpOn);
  }
}

TEST(RunScenario, DurationOfOneTickGivesOneFrame) {
  ProcessParams p;
  EXPECT_EQ(run_scenario(p, {}, p.dt).size(), 1u);
}

TEST(RunScenario, TickCountIsCeilOfDurationOverDt) {
  EXPECT_EQ(tick_count(1200.0, 0.1), 12000u);
  EXPECT_EQ(tick_count(0.25, 0.1), 3u);
  EXPECT_THROW(tick_count(0.0, 0.1), InvalidArgument);
}

TEST(RunScenario, PeriodMatchesClosedFormFillAndDrainTimes) {
  ProcessParams p;
  const auto trace = run_scenario(p, {}, 600.0);
  std::vector<double> onTimes;
  bool prev = false;
  for (const auto& f : trace) {
    if (f.trueState.pumpOn && !prev) onTimes.push_back(f.t);
    prev = f.trueState.pumpOn;
  }
  ASSERT_GE(onTimes.size(), 5u);

  const double fillRate = (p.pumpFlow - p.reflowNatural) / p.areaC2;
  const double drainRate = p.reflowNatural / p.areaC2;
  const double period = p.hysteresis / fillRate + p.hysteresis / drainRate;
  // Discrete switching overshoots by at most one step at each threshold.
  const double tol = 2.0 * p.dt + fillRate * p.dt / drainRate + drainRate * p.dt / fillRate;
  for (std::size_t i = 2; i < onTimes.size(); ++i) {
    EXPECT_NEAR(onTimes[i] - onTimes[i - 1], period, tol);
  }
}

TEST(RunScenario, Deterministic) {
  ProcessParams p;
  AttackScript script;
  script.pumpOverrideWindows = {{30.0, 90.0}};
  script.valveOpenWindows = {{100.0, 110.0}};
  const auto a = run_scenario(p, script, 200.0);
  const auto b = run_scenario(p, script, 200.0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].trueState, b[i].trueState);
    EXPECT_EQ(a[i].reportedState, b[i].reportedState);
  }
}

TEST(RunScenario, InvalidParamsNameTheKey) {
  ProcessParams p;
  p.hysteresis = 20.0;
  try {
    run_scenario(p, {}, 100.0);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "hysteresis");
  }
  p = {};
  p.reflowValveOpen = 1.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.dt = 5.0;
  EXPECT_THROW(p.validate(), ConfigError);
}

// Invariants over randomised attack-free and attacked runs.
class ProcessInvariants : public ::testing::TestWithParam<int> {};

TEST_P(ProcessInvariants, ConservationBoundsAndHysteresis) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ProcessParams p;
  p.areaC1 = 50.0 + 150.0 * u(rng);
  p.areaC2 = 50.0 + 150.0 * u(rng);
  p.pumpFlow = 20.0 + 60.0 * u(rng);
  p.reflowNatural = 1.0 + 9.0 * u(rng);
  p.reflowValveOpen = p.reflowNatural + 5.0 + 20.0 * u(rng);
  p.thresholdHigh = 8.0 + 8.0 * u(rng);
  p.hysteresis = 1.0 + 3.0 * u(rng);
  p.initLevelC2 = (p.thresholdHigh - p.hysteresis) * u(rng);
  p.initLevelC1 = 15.0 + 10.0 * u(rng);
  ASSERT_NO_THROW(p.validate());

  AttackScript script;
  const bool attacked = GetParam() % 2 == 1;
  if (attacked) {
    script.pumpOverrideWindows = {{100.0, 200.0 + 100.0 * u(rng)}};
    script.valveOpenWindows = {{20.0, 40.0}, {320.0, 330.0}};
  }
  const auto trace = run_scenario(p, script, 400.0);
  const double v0 = p.total_volume();
  const double upper = p.thresholdHigh + p.pumpFlow * p.dt / p.areaC2;

  ProcessState prev = initial_state(p);
  for (const auto& f : trace) {
    const ProcessState& s = f.trueState;
    EXPECT_NEAR(s.volume(p), v0, 1e-9 * v0);
    EXPECT_GE(s.levelC1, 0.0);
    EXPECT_GE(s.levelC2, 0.0);
    if (s.pumpDry) EXPECT_TRUE(s.pumpOn);
    const double tStep = prev.t;
    const bool overridden =
        std::any_of(script.pumpOverrideWindows.begin(), script.pumpOverrideWindows.end(),
                    [&](const TimeWindow& w) { return w.contains(tStep); });
    if (!attacked) EXPECT_LE(s.levelC2, upper);
    if (!overridden) {
      if (prev.pumpOn && !s.pumpOn) EXPECT_GE(prev.levelC2, p.thresholdHigh);
      if (!prev.pumpOn && s.pumpOn) EXPECT_LE(prev.levelC2, p.switch_on_level());
    }
    prev = s;
  }
}

INSTANTIATE_TEST_SUITE_P(Randomised, ProcessInvariants, ::testing::Range(0, 12));

TEST(RunScenario, DryRunPersistsUntilOverrideEnds) {
  ProcessParams p;
  AttackScript script;
  script.pumpOverrideWindows = {{60.0, 160.0}};
  const auto trace = run_scenario(p, script, 200.0);
  bool seenDry = false;
  ProcessState prev = initial_state(p);
  for (const auto& f : trace) {
    const bool inWindow = script.pumpOverrideWindows[0].contains(prev.t);
    if (f.trueState.pumpDry) {
      seenDry = true;
      EXPECT_TRUE(inWindow);
    } else if (seenDry) {
      EXPECT_FALSE(inWindow) << "dry run interrupted at t=" << f.t;
    }
    prev = f.trueState;
  }
  EXPECT_TRUE(seenDry);
}
