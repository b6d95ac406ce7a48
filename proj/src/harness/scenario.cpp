#include "sidechan/harness/scenario.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "sidechan/error.hpp"

namespace sidechan::harness {

using nlohmann::json;

namespace {

template <typename T>
void read_opt(const json& obj, const char* section, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  const std::string path = section[0] ? fmt::format("{}.{}", section, key) : std::string(key);
  try {
    out = it->template get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path, fmt::format("wrong type ({})", it->type_name()));
  }
}

const json* section(const json& doc, const char* name) {
  const auto it = doc.find(name);
  if (it == doc.end()) return nullptr;
  if (!it->is_object()) throw ConfigError(name, "must be an object");
  return &*it;
}

std::vector<process::TimeWindow> read_windows(const json& obj, const char* key) {
  std::vector<process::TimeWindow> out;
  const auto it = obj.find(key);
  if (it == obj.end()) return out;
  const std::string path = fmt::format("attacks.{}", key);
  if (!it->is_array()) throw ConfigError(path, "must be an array of [t0, t1] pairs");
  for (const auto& w : *it) {
    if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number()) {
      throw ConfigError(path, "each window must be a [t0, t1] pair of numbers");
    }
    out.push_back({w[0].get<double>(), w[1].get<double>()});
  }
  return out;
}

json windows_json(const std::vector<process::TimeWindow>& ws) {
  json arr = json::array();
  for (const auto& w : ws) arr.push_back({w.start, w.end});
  return arr;
}

}  // namespace

void ScenarioDoc::validate() const {
  if (!(durationS >= kMinScenarioDurationS)) {
    throw ConfigError("duration_s", fmt::format("must be >= {} s (got {})", kMinScenarioDurationS,
                                                durationS));
  }
  const auto scoped = [](const char* prefix, auto&& check) {
    try {
      check();
    } catch (const ConfigError& e) {
      if (e.key().find('.') != std::string::npos) throw;
      const std::string& msg = e.what();
      throw ConfigError(fmt::format("{}.{}", prefix, e.key()), msg.substr(e.key().size() + 2));
    }
  };
  scoped("process", [&] { process.validate(); });
  scoped("attacks", [&] { attacks.validate(); });
  synth.validate();
  frames.validate();
  detection.validate();
}

ScenarioDoc ScenarioDoc::without_attacks() const {
  ScenarioDoc copy = *this;
  copy.attacks = {};
  return copy;
}

ScenarioDoc parse_scenario(std::string_view text, std::string id) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", fmt::format("malformed JSON: {}", e.what()));
  }
  if (!doc.is_object()) throw ConfigError("<document>", "top level must be an object");

  ScenarioDoc sc;
  sc.id = std::move(id);
  read_opt(doc, "", "id", sc.id);
  read_opt(doc, "", "duration_s", sc.durationS);

  if (const json* p = section(doc, "process")) {
    auto& pp = sc.process;
    read_opt(*p, "process", "area_c1", pp.areaC1);
    read_opt(*p, "process", "area_c2", pp.areaC2);
    read_opt(*p, "process", "pump_flow", pp.pumpFlow);
    read_opt(*p, "process", "reflow_natural", pp.reflowNatural);
    read_opt(*p, "process", "reflow_valve_open", pp.reflowValveOpen);
    read_opt(*p, "process", "threshold_high", pp.thresholdHigh);
    read_opt(*p, "process", "hysteresis", pp.hysteresis);
    read_opt(*p, "process", "init_c1", pp.initLevelC1);
    read_opt(*p, "process", "init_c2", pp.initLevelC2);
    read_opt(*p, "process", "dt", pp.dt);
  }
  if (const json* a = section(doc, "attacks")) {
    sc.attacks.pumpOverrideWindows = read_windows(*a, "pump_override");
    sc.attacks.valveOpenWindows = read_windows(*a, "valve_open");
    read_opt(*a, "attacks", "spoof", sc.attacks.spoofTelemetry);
  }
  if (const json* s = section(doc, "synth")) {
    read_opt(*s, "synth", "sample_rate", sc.synth.sampleRate);
    read_opt(*s, "synth", "seed", sc.synth.seed);
    read_opt(*s, "synth", "ramp_ms", sc.synth.transitionRampMs);
  }
  if (const json* f = section(doc, "frames")) {
    read_opt(*f, "frames", "len", sc.frames.frameLen);
    read_opt(*f, "frames", "hop", sc.frames.hop);
    std::string window(dsp::to_string(sc.frames.window));
    read_opt(*f, "frames", "window", window);
    sc.frames.window = dsp::parse_window(window);
  }
  if (const json* d = section(doc, "detect")) {
    read_opt(*d, "detect", "z_threshold", sc.detection.zThreshold);
    read_opt(*d, "detect", "consecutive", sc.detection.consecutiveFrames);
    read_opt(*d, "detect", "ratio_margin", sc.detection.ratioMargin);
  }
  sc.validate();
  return sc;
}

ScenarioDoc load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open scenario '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.stem().string());
}

std::string scenario_to_json(const ScenarioDoc& sc) {
  const auto& p = sc.process;
  json doc = {
      {"id", sc.id},
      {"duration_s", sc.durationS},
      {"process",
       {{"area_c1", p.areaC1},
        {"area_c2", p.areaC2},
        {"pump_flow", p.pumpFlow},
        {"reflow_natural", p.reflowNatural},
        {"reflow_valve_open", p.reflowValveOpen},
        {"threshold_high", p.thresholdHigh},
        {"hysteresis", p.hysteresis},
        {"init_c1", p.initLevelC1},
        {"init_c2", p.initLevelC2},
        {"dt", p.dt}}},
      {"attacks",
       {{"pump_override", windows_json(sc.attacks.pumpOverrideWindows)},
        {"valve_open", windows_json(sc.attacks.valveOpenWindows)},
        {"spoof", sc.attacks.spoofTelemetry}}},
      {"synth",
       {{"sample_rate", sc.synth.sampleRate},
        {"seed", sc.synth.seed},
        {"ramp_ms", sc.synth.transitionRampMs}}},
      {"frames",
       {{"len", sc.frames.frameLen},
        {"hop", sc.frames.hop},
        {"window", std::string(dsp::to_string(sc.frames.window))}}},
      {"detect",
       {{"z_threshold", sc.detection.zThreshold},
        {"consecutive", sc.detection.consecutiveFrames},
        {"ratio_margin", sc.detection.ratioMargin}}},
  };
  return doc.dump(2) + "\n";
}

ScenarioDoc default_normal_scenario() {
  ScenarioDoc sc;
  sc.id = "normal";
  sc.synth.seed = 1;
  return sc;
}

ScenarioDoc attack_scenario() {
  ScenarioDoc sc;
  sc.id = "attack";
  sc.synth.seed = 2;
  sc.attacks.spoofTelemetry = true;
  // Each valve window sits early in a normal pump-off phase so it drains Container 2 by
  // 1.5 cm without reaching the switch-on level: one reflow episode per window.
  sc.attacks.valveOpenWindows = {{150.0, 156.0}, {305.0, 311.0}, {460.0, 466.0}};
  // Container 1 runs empty about 34 s into the override; the pump then runs dry ~66 s.
  sc.attacks.pumpOverrideWindows = {{800.0, 900.0}};
  return sc;
}

}  // namespace sidechan::harness
