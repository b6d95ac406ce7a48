#include "sidechan/process_sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "sidechan/error.hpp"

namespace sidechan::process {

namespace {

void require_positive(double v, const char* key) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(key, fmt::format("must be finite and > 0 (got {})", v));
  }
}

void validate_windows(const std::vector<TimeWindow>& windows, const char* key) {
  std::vector<TimeWindow> sorted = windows;
  std::sort(sorted.begin(), sorted.end(),
            [](const TimeWindow& a, const TimeWindow& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& w = sorted[i];
    if (!std::isfinite(w.start) || !std::isfinite(w.end) || !(w.start < w.end)) {
      throw ConfigError(key, fmt::format("window [{}, {}] must satisfy start < end", w.start, w.end));
    }
    if (i > 0 && w.start < sorted[i - 1].end) {
      throw ConfigError(key, fmt::format("windows [{}, {}] and [{}, {}] overlap", sorted[i - 1].start,
                                         sorted[i - 1].end, w.start, w.end));
    }
  }
}

bool inside_any(const std::vector<TimeWindow>& windows, double t) {
  return std::any_of(windows.begin(), windows.end(),
                     [t](const TimeWindow& w) { return w.contains(t); });
}

}  // namespace

void ProcessParams::validate() const {
  require_positive(areaC1, "area_c1");
  require_positive(areaC2, "area_c2");
  require_positive(pumpFlow, "pump_flow");
  require_positive(reflowNatural, "reflow_natural");
  require_positive(reflowValveOpen, "reflow_valve_open");
  require_positive(thresholdHigh, "threshold_high");
  require_positive(hysteresis, "hysteresis");
  require_positive(dt, "dt");
  if (!(reflowValveOpen > reflowNatural)) {
    throw ConfigError("reflow_valve_open", "must exceed reflow_natural");
  }
  if (!(hysteresis < thresholdHigh)) {
    throw ConfigError("hysteresis", "must satisfy 0 < hysteresis < threshold_high");
  }
  if (!(initLevelC1 >= 0.0) || !std::isfinite(initLevelC1)) {
    throw ConfigError("init_c1", "must be finite and >= 0");
  }
  if (!(initLevelC2 >= 0.0) || !(initLevelC2 < thresholdHigh)) {
    throw ConfigError("init_c2", "must satisfy 0 <= init_c2 < threshold_high");
  }
  // Per-step depth change must stay well inside the hysteresis band.
  const double maxStepVolume = std::max(pumpFlow, reflowValveOpen) * dt;
  if (!(maxStepVolume < 0.1 * std::min(areaC1, areaC2) * hysteresis)) {
    throw ConfigError("dt", fmt::format("too large: one step moves {} cm^3, limit is 10% of the "
                                        "hysteresis band volume",
                                        maxStepVolume));
  }
}

void AttackScript::validate() const {
  validate_windows(pumpOverrideWindows, "pump_override");
  validate_windows(valveOpenWindows, "valve_open");
}

ProcessState initial_state(const ProcessParams& params) {
  ProcessState s;
  s.levelC1 = params.initLevelC1;
  s.levelC2 = params.initLevelC2;
  return s;
}

bool control_step(const ProcessState& state, const ProcessParams& params) {
  if (state.levelC2 >= params.thresholdHigh) return false;
  if (state.levelC2 <= params.switch_on_level()) return true;
  return state.pumpOn;
}

ProcessState integrate(const ProcessState& state, bool pumpCommand, const ProcessParams& params) {
  if (!std::isfinite(state.levelC1) || !std::isfinite(state.levelC2)) {
    throw CorruptState(fmt::format("non-finite level at t={} (C1={}, C2={})", state.t,
                                   state.levelC1, state.levelC2));
  }
  const double vol1 = params.areaC1 * std::max(state.levelC1, 0.0);
  const double vol2 = params.areaC2 * std::max(state.levelC2, 0.0);

  const double reflowRate = state.valveOpen ? params.reflowValveOpen : params.reflowNatural;
  const double reflow = std::min(reflowRate * params.dt, vol2);
  const double available = vol1 + reflow;
  const double pumpCapacity = params.pumpFlow * params.dt;

  ProcessState next = state;
  next.t = state.t + params.dt;
  next.pumpOn = pumpCommand;

  double newVol1 = 0.0;
  double newVol2 = 0.0;
  if (pumpCommand && pumpCapacity >= available) {
    // Everything reaching Container 1 this step is pumped straight back out.
    newVol1 = 0.0;
    newVol2 = vol2 + (available - reflow);
  } else {
    const double pumped = pumpCommand ? pumpCapacity : 0.0;
    const double delta = pumped - reflow;
    newVol1 = vol1 - delta;
    newVol2 = vol2 + delta;
  }
  next.levelC1 = std::max(newVol1, 0.0) / params.areaC1;
  next.levelC2 = std::max(newVol2, 0.0) / params.areaC2;
  next.pumpDry = pumpCommand && next.levelC1 == 0.0;
  return next;
}

ActuatorCommand apply_attack(bool controllerCommand, const AttackScript& script, double t) {
  ActuatorCommand cmd;
  cmd.pumpOn = controllerCommand || inside_any(script.pumpOverrideWindows, t);
  cmd.valveOpen = inside_any(script.valveOpenWindows, t);
  return cmd;
}

TelemetryFrame report_telemetry(const ProcessState& trueState, const ProcessState& shadow,
                                const AttackScript& script) {
  if (trueState.t != shadow.t) {
    throw Mismatch(fmt::format("shadow simulation out of step: true t={} shadow t={}", trueState.t,
                               shadow.t));
  }
  return TelemetryFrame{trueState.t, trueState, script.spoofTelemetry ? shadow : trueState};
}

std::size_t tick_count(double durationS, double dt) {
  if (!(durationS > 0.0) || !(dt > 0.0)) {
    throw InvalidArgument("duration and dt must be > 0");
  }
  // Guard against 1200 / 0.1 = 12000.000000000002 style round-up.
  const double ratio = durationS / dt;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest)) {
    return static_cast<std::size_t>(std::max(nearest, 1.0));
  }
  return static_cast<std::size_t>(std::ceil(ratio));
}

std::vector<TelemetryFrame> run_scenario(const ProcessParams& params, const AttackScript& script,
                                         double durationS) {
  params.validate();
  script.validate();
  const std::size_t n = tick_count(durationS, params.dt);

  std::vector<TelemetryFrame> trace;
  trace.reserve(n);
  ProcessState state = initial_state(params);
  ProcessState shadow = state;
  for (std::size_t i = 0; i < n; ++i) {
    const ActuatorCommand cmd = apply_attack(control_step(state, params), script, state.t);
    state.valveOpen = cmd.valveOpen;
    state = integrate(state, cmd.pumpOn, params);

    const bool shadowCmd = control_step(shadow, params);
    shadow.valveOpen = false;
    shadow = integrate(shadow, shadowCmd, params);

    trace.push_back(report_telemetry(state, shadow, script));
  }
  return trace;
}

}  // namespace sidechan::process
