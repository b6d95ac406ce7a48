#pragma once

#include <cstddef>
#include <vector>

namespace sidechan::process {

/// Geometry, flows and controller settings of the two-container batch process.
/// Lengths in cm, areas in cm^2, flows in cm^3/s, times in s.
struct ProcessParams {
  double areaC1 = 100.0;
  double areaC2 = 100.0;
  double pumpFlow = 50.0;
  double reflowNatural = 5.0;
  double reflowValveOpen = 25.0;
  double thresholdHigh = 10.0;  // pump switches off at or above this Container 2 level
  double hysteresis = 2.0;      // pump switches on at or below thresholdHigh - hysteresis
  double initLevelC1 = 20.0;
  double initLevelC2 = 5.0;
  double dt = 0.1;

  /// Throws ConfigError naming the first violated field.
  void validate() const;

  double switch_on_level() const noexcept { return thresholdHigh - hysteresis; }
  double total_volume() const noexcept { return areaC1 * initLevelC1 + areaC2 * initLevelC2; }
};

struct ProcessState {
  double t = 0.0;
  double levelC1 = 0.0;
  double levelC2 = 0.0;
  bool pumpOn = false;  // command applied during the step that produced this state
  bool valveOpen = false;
  bool pumpDry = false;

  bool operator==(const ProcessState&) const = default;

  double volume(const ProcessParams& p) const noexcept {
    return p.areaC1 * levelC1 + p.areaC2 * levelC2;
  }
};

ProcessState initial_state(const ProcessParams& params);

/// Half-open time interval [start, end).
struct TimeWindow {
  double start = 0.0;
  double end = 0.0;

  bool contains(double t) const noexcept { return t >= start && t < end; }
  double length() const noexcept { return end - start; }
  bool operator==(const TimeWindow&) const = default;
};

struct AttackScript {
  std::vector<TimeWindow> pumpOverrideWindows;
  std::vector<TimeWindow> valveOpenWindows;
  bool spoofTelemetry = false;

  void validate() const;
  bool has_attacks() const noexcept {
    return !pumpOverrideWindows.empty() || !valveOpenWindows.empty();
  }
  bool operator==(const AttackScript&) const = default;
};

struct TelemetryFrame {
  double t = 0.0;
  ProcessState trueState;
  ProcessState reportedState;
};

struct ActuatorCommand {
  bool pumpOn = false;
  bool valveOpen = false;
};

/// Two-threshold level controller. Keeps the previous command inside the hysteresis band.
bool control_step(const ProcessState& state, const ProcessParams& params);

/// One explicit Euler step. Reflow rate follows `state.valveOpen`; the pump only moves
/// water that is present in Container 1. Throws CorruptState on non-finite levels.
ProcessState integrate(const ProcessState& state, bool pumpCommand, const ProcessParams& params);

/// Resolves the attacker's overrides on top of the controller output at time `t`.
ActuatorCommand apply_attack(bool controllerCommand, const AttackScript& script, double t);

/// Builds the frame the PLC would report. `shadow` is the attack-free twin at the same time.
TelemetryFrame report_telemetry(const ProcessState& trueState, const ProcessState& shadow,
                                const AttackScript& script);

std::size_t tick_count(double durationS, double dt);

/// Runs control -> attack -> integrate per tick with an attack-free shadow in lockstep.
std::vector<TelemetryFrame> run_scenario(const ProcessParams& params, const AttackScript& script,
                                         double durationS);

}  // namespace sidechan::process
