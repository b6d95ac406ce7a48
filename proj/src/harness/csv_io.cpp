#include "sidechan/harness/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <string>

#include <fmt/format.h>

#include "sidechan/error.hpp"

namespace sidechan::harness {

namespace {

constexpr const char* kTraceHeader =
    "t,levelC1_true,levelC2_true,pump_true,valve_true,dry_true,levelC1_rep,levelC2_rep,pump_rep";

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return in;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_num(std::string_view s, const std::filesystem::path& path, std::size_t lineNo) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(fmt::format("{}:{}: bad number '{}'", path.string(), lineNo, s));
  }
  return v;
}

bool parse_flag(std::string_view s, const std::filesystem::path& path, std::size_t lineNo) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw FormatError(fmt::format("{}:{}: expected 0/1, got '{}'", path.string(), lineNo, s));
}

// Reads all data rows after checking the header; strips a trailing CR if present.
template <typename Fn>
void for_each_row(const std::filesystem::path& path, std::string_view header, Fn&& fn) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(fmt::format("{}: empty file", path.string()));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) {
    throw FormatError(fmt::format("{}: unexpected header '{}'", path.string(), line));
  }
  std::size_t lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(split(line), lineNo);
  }
}

}  // namespace

void write_trace_csv(const std::filesystem::path& path,
                     std::span<const process::TelemetryFrame> trace) {
  auto out = open_out(path);
  out << kTraceHeader << '\n';
  for (const auto& f : trace) {
    const auto& t = f.trueState;
    const auto& r = f.reportedState;
    out << fmt::format("{:.17g},{:.17g},{:.17g},{:d},{:d},{:d},{:.17g},{:.17g},{:d}\n", f.t,
                       t.levelC1, t.levelC2, t.pumpOn ? 1 : 0, t.valveOpen ? 1 : 0,
                       t.pumpDry ? 1 : 0, r.levelC1, r.levelC2, r.pumpOn ? 1 : 0);
  }
  if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

std::vector<process::TelemetryFrame> read_trace_csv(const std::filesystem::path& path) {
  std::vector<process::TelemetryFrame> trace;
  for_each_row(path, kTraceHeader, [&](const std::vector<std::string_view>& c, std::size_t ln) {
    if (c.size() != 9) throw FormatError(fmt::format("{}:{}: expected 9 columns", path.string(), ln));
    process::TelemetryFrame f;
    f.t = parse_num<double>(c[0], path, ln);
    f.trueState.t = f.t;
    f.trueState.levelC1 = parse_num<double>(c[1], path, ln);
    f.trueState.levelC2 = parse_num<double>(c[2], path, ln);
    f.trueState.pumpOn = parse_flag(c[3], path, ln);
    f.trueState.valveOpen = parse_flag(c[4], path, ln);
    f.trueState.pumpDry = parse_flag(c[5], path, ln);
    f.reportedState.t = f.t;
    f.reportedState.levelC1 = parse_num<double>(c[6], path, ln);
    f.reportedState.levelC2 = parse_num<double>(c[7], path, ln);
    f.reportedState.pumpOn = parse_flag(c[8], path, ln);
    trace.push_back(f);
  });
  return trace;
}

void write_labels_csv(const std::filesystem::path& path,
                      std::span<const synth::LabelChange> labels) {
  auto out = open_out(path);
  out << "sample_index,acoustic_state\n";
  for (const auto& l : labels) out << l.sampleIndex << ',' << synth::to_string(l.state) << '\n';
}

std::vector<synth::LabelChange> read_labels_csv(const std::filesystem::path& path) {
  std::vector<synth::LabelChange> labels;
  for_each_row(path, "sample_index,acoustic_state",
               [&](const std::vector<std::string_view>& c, std::size_t ln) {
                 if (c.size() != 2) {
                   throw FormatError(fmt::format("{}:{}: expected 2 columns", path.string(), ln));
                 }
                 const auto state = synth::parse_acoustic_state(c[1]);
                 if (!state) {
                   throw FormatError(fmt::format("{}:{}: unknown state '{}'", path.string(), ln, c[1]));
                 }
                 labels.push_back({parse_num<std::uint64_t>(c[0], path, ln), *state});
               });
  return labels;
}

void write_alerts_csv(const std::filesystem::path& path, std::span<const detector::Alert> alerts) {
  auto out = open_out(path);
  out << "frame_index,time_s,label,max_z,offending_band_hz,verdict\n";
  for (const auto& a : alerts) {
    out << fmt::format("{},{:.17g},{},{:.17g},{:.17g},{}\n", a.frameIndex, a.timeS,
                       profiling::to_string(a.label), a.maxZ, a.offendingBandHz,
                       detector::to_string(a.verdict));
  }
}

void write_spectrum_csv(const std::filesystem::path& path, double binWidth,
                        std::span<const double> values) {
  auto out = open_out(path);
  out << "freq_hz,power\n";
  for (std::size_t k = 0; k < values.size(); ++k) {
    out << fmt::format("{:.17g},{:.17g}\n", binWidth * static_cast<double>(k), values[k]);
  }
}

std::vector<SpectrumRow> read_spectrum_csv(const std::filesystem::path& path) {
  std::vector<SpectrumRow> rows;
  for_each_row(path, "freq_hz,power", [&](const std::vector<std::string_view>& c, std::size_t ln) {
    if (c.size() != 2) throw FormatError(fmt::format("{}:{}: expected 2 columns", path.string(), ln));
    rows.push_back({parse_num<double>(c[0], path, ln), parse_num<double>(c[1], path, ln)});
  });
  return rows;
}

}  // namespace sidechan::harness
