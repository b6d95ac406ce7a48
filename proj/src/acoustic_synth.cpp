#include "sidechan/acoustic_synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>

#include <fmt/format.h>

#include "sidechan/dsp.hpp"
#include "sidechan/error.hpp"
#include "sidechan/rng.hpp"

namespace sidechan::synth {

namespace {

constexpr double kClipLimit = 10.0;
constexpr double kNoiseCrest = 4.0;
constexpr std::size_t kNoiseBlock = 4096;
constexpr std::size_t kNoiseHop = kNoiseBlock / 4;
constexpr std::size_t kNoiseOverlap = kNoiseBlock / kNoiseHop;
constexpr std::uint64_t kOscGrid = 2048;
constexpr std::size_t kChunk = 1 << 16;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Unit-RMS band-limited Gaussian noise built from overlap-added random-spectrum blocks.
// Block b covers absolute samples [b*hop, b*hop + N) under a sine window whose squares sum
// to one across the 50% overlap, so the variance is stationary.
class NoiseSource {
 public:
  NoiseSource(double lowHz, double highHz, double sampleRate, std::uint64_t key,
              const dsp::FftPlan& plan)
      : key_(key), plan_(plan), window_(kNoiseBlock) {
    const double binWidth = sampleRate / static_cast<double>(kNoiseBlock);
    kLo_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(lowHz / binWidth)));
    // Bins with centre in [lowHz, highHz); adjacent bands never share a bin.
    const auto upper = static_cast<std::size_t>(std::ceil(highHz / binWidth));
    kHi_ = std::min<std::size_t>(kNoiseBlock / 2 - 1, upper == 0 ? 0 : upper - 1);
    // Periodic Hann at 75% overlap: squared windows sum to 3/2.
    const double norm = std::sqrt(2.0 / 3.0);
    for (std::size_t i = 0; i < kNoiseBlock; ++i) {
      const double v = std::sin(std::numbers::pi * (static_cast<double>(i) + 0.5) /
                                static_cast<double>(kNoiseBlock));
      window_[i] = norm * v * v;
    }
  }

  void add(std::uint64_t begin, std::span<double> out, double gain) {
    if (kHi_ < kLo_ || gain == 0.0) return;
    const auto first = static_cast<std::int64_t>(begin);
    const auto last = first + static_cast<std::int64_t>(out.size());
    const auto hop = static_cast<std::int64_t>(kNoiseHop);
    const std::int64_t bFirst = floor_div(first, hop) - static_cast<std::int64_t>(kNoiseOverlap - 1);
    const std::int64_t bLast = floor_div(last - 1, hop);
    for (std::int64_t b = bFirst; b <= bLast; ++b) {
      const std::int64_t blockStart = b * hop;
      const std::int64_t lo = std::max(first, blockStart);
      const std::int64_t hi = std::min(last, blockStart + static_cast<std::int64_t>(kNoiseBlock));
      if (lo >= hi) continue;
      const std::vector<double>& data = block(b);
      for (std::int64_t n = lo; n < hi; ++n) {
        out[static_cast<std::size_t>(n - first)] += gain * data[static_cast<std::size_t>(n - blockStart)];
      }
    }
  }

 private:
  struct Slot {
    std::int64_t index = 0;
    bool valid = false;
    std::vector<double> data;
  };

  const std::vector<double>& block(std::int64_t b) {
    for (auto& s : slots_) {
      if (s.valid && s.index == b) return s.data;
    }
    Slot& s = slots_[next_];
    next_ = (next_ + 1) % slots_.size();
    s.index = b;
    s.valid = true;
    generate(b, s.data);
    return s.data;
  }

  void generate(std::int64_t b, std::vector<double>& out) {
    const std::size_t m = kHi_ - kLo_ + 1;
    const double sigma = static_cast<double>(kNoiseBlock) / (2.0 * std::sqrt(static_cast<double>(m)));
    std::vector<dsp::Complex> spec(kNoiseBlock, dsp::Complex(0.0, 0.0));
    SplitMix64 rng(combine_keys(key_, static_cast<std::uint64_t>(b)));
    for (std::size_t k = kLo_; k <= kHi_; ++k) {
      double re = 0.0;
      double im = 0.0;
      rng.gaussian_pair(re, im);
      spec[k] = dsp::Complex(sigma * re, sigma * im);
      spec[kNoiseBlock - k] = std::conj(spec[k]);
    }
    plan_.transform(spec, true);
    out.resize(kNoiseBlock);
    for (std::size_t i = 0; i < kNoiseBlock; ++i) out[i] = spec[i].real() * window_[i];
  }

  std::uint64_t key_;
  const dsp::FftPlan& plan_;
  std::vector<double> window_;
  std::size_t kLo_ = 1;
  std::size_t kHi_ = 0;
  std::array<Slot, kNoiseOverlap + 1> slots_{};
  std::size_t next_ = 0;
};

std::uint64_t band_key(std::uint64_t seed, const NoiseBand& band) {
  return combine_keys(seed, combine_keys(std::bit_cast<std::uint64_t>(band.lowHz),
                                         std::bit_cast<std::uint64_t>(band.highHz)));
}

// Adds a sine partial over absolute positions [begin, begin + out.size()). The phasor is
// re-anchored exactly at every multiple of kOscGrid so results do not depend on where a
// render starts.
void add_partial(const Partial& p, double sampleRate, std::uint64_t begin, std::span<double> out) {
  const std::uint64_t end = begin + out.size();
  const double step = 2.0 * std::numbers::pi * p.frequencyHz / sampleRate;
  const std::complex<double> rot(std::cos(step), std::sin(step));
  for (std::uint64_t g = (begin / kOscGrid) * kOscGrid; g < end; g += kOscGrid) {
    const double cycles = p.frequencyHz * static_cast<double>(g) / sampleRate;
    const double phase = 2.0 * std::numbers::pi * (cycles - std::floor(cycles));
    double re = std::cos(phase);
    double im = std::sin(phase);
    const std::uint64_t stop = std::min(end, g + kOscGrid);
    for (std::uint64_t n = g; n < stop; ++n) {
      if (n >= begin) out[n - begin] += p.amplitude * im;
      const double nr = re * rot.real() - im * rot.imag();
      im = re * rot.imag() + im * rot.real();
      re = nr;
    }
  }
}

// Renders raw (un-normalised) single-state audio; owns the noise generators.
class StateRenderer {
 public:
  explicit StateRenderer(const SynthConfig& config) : config_(config), plan_(kNoiseBlock) {}

  void render(AcousticState state, std::uint64_t begin, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    const SpectralEnvelope& env = config_.envelope(state);
    for (const Partial& p : env.partials) add_partial(p, config_.sampleRate, begin, out);
    for (const NoiseBand& nb : env.noise) source(nb).add(begin, out, nb.rms());
  }

 private:
  NoiseSource& source(const NoiseBand& nb) {
    const std::uint64_t key = band_key(config_.seed, nb);
    auto it = sources_.find(key);
    if (it == sources_.end()) {
      it = sources_.try_emplace(key, nb.lowHz, nb.highHz, config_.sampleRate, key, plan_).first;
    }
    return it->second;
  }

  const SynthConfig& config_;
  dsp::FftPlan plan_;
  std::map<std::uint64_t, NoiseSource> sources_;
};

float finish_sample(double raw, double gain, std::uint64_t index) {
  if (!std::isfinite(raw) || std::abs(raw) > kClipLimit) {
    throw ClippingError(fmt::format("pre-normalisation peak {} at sample {} exceeds {}", raw, index,
                                    kClipLimit));
  }
  return static_cast<float>(std::clamp(raw * gain, -1.0, 1.0));
}

struct StateSegment {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
  AcousticState state = AcousticState::PumpInactiveNormal;
};

std::vector<StateSegment> state_segments(std::span<const process::TelemetryFrame> trace,
                                         double sampleRate) {
  const auto spans = tick_spans(trace, sampleRate);
  std::vector<StateSegment> segs;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (spans[i].end == spans[i].begin) continue;
    const AcousticState s = acoustic_state_of(trace[i].trueState);
    if (!segs.empty() && segs.back().state == s) {
      segs.back().end = spans[i].end;
    } else {
      segs.push_back({spans[i].begin, spans[i].end, s});
    }
  }
  // Re-base so that the first rendered sample has index 0.
  if (!segs.empty()) {
    const std::uint64_t origin = segs.front().begin;
    for (auto& s : segs) {
      s.begin -= origin;
      s.end -= origin;
    }
  }
  return segs;
}

class TraceRenderer {
 public:
  TraceRenderer(std::vector<StateSegment> segs, const SynthConfig& config)
      : segs_(std::move(segs)), config_(config), states_(config), gain_(config.output_gain()),
        ramp_(config.ramp_samples()) {}

  std::uint64_t length() const { return segs_.empty() ? 0 : segs_.back().end; }

  void render(std::uint64_t begin, std::uint64_t end, std::span<float> out) {
    std::vector<double> cur;
    std::vector<double> prev;
    auto it = std::upper_bound(segs_.begin(), segs_.end(), begin,
                               [](std::uint64_t v, const StateSegment& s) { return v < s.end; });
    for (; it != segs_.end() && it->begin < end; ++it) {
      const std::uint64_t lo = std::max(begin, it->begin);
      const std::uint64_t hi = std::min(end, it->end);
      const bool hasPrev = it != segs_.begin();
      const std::uint64_t rampEnd = hasPrev ? std::min(it->end, it->begin + ramp_) : it->begin;
      for (std::uint64_t c = lo; c < hi; c += kChunk) {
        const std::uint64_t ce = std::min(hi, c + kChunk);
        const std::size_t n = ce - c;
        cur.resize(n);
        states_.render(it->state, c, cur);
        if (c < rampEnd) {
          prev.resize(n);
          states_.render(std::prev(it)->state, c, prev);
          for (std::uint64_t i = c; i < std::min(ce, rampEnd); ++i) {
            const double w = (static_cast<double>(i - it->begin) + 0.5) / static_cast<double>(ramp_);
            cur[i - c] = (1.0 - w) * prev[i - c] + w * cur[i - c];
          }
        }
        for (std::size_t i = 0; i < n; ++i) {
          out[c - begin + i] = finish_sample(cur[i], gain_, c + i);
        }
      }
    }
  }

  std::vector<LabelChange> labels() const {
    std::vector<LabelChange> out;
    for (const auto& s : segs_) out.push_back({s.begin, s.state});
    return out;
  }

 private:
  std::vector<StateSegment> segs_;
  const SynthConfig& config_;
  StateRenderer states_;
  double gain_;
  std::uint64_t ramp_;
};

}  // namespace

std::string_view to_string(AcousticState s) {
  switch (s) {
    case AcousticState::PumpActiveNormal: return "pump_active_normal";
    case AcousticState::PumpInactiveNormal: return "pump_inactive_normal";
    case AcousticState::PumpActiveDry: return "pump_active_dry";
    case AcousticState::PumpInactiveReflow: return "pump_inactive_reflow";
  }
  return "unknown";
}

std::optional<AcousticState> parse_acoustic_state(std::string_view name) {
  for (AcousticState s : kAllAcousticStates) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

double NoiseBand::rms() const noexcept {
  return amplitude * std::sqrt(std::max(highHz - lowHz, 0.0) / 1000.0);
}

void SpectralEnvelope::validate(double sampleRate) const {
  const double nyquist = sampleRate / 2.0;
  for (const auto& p : partials) {
    if (!(p.frequencyHz > 0.0 && p.frequencyHz < nyquist)) {
      throw ConfigError("envelope.partials", fmt::format("frequency {} Hz outside (0, {})",
                                                         p.frequencyHz, nyquist));
    }
    if (!(p.amplitude >= 0.0) || !std::isfinite(p.amplitude)) {
      throw ConfigError("envelope.partials", "amplitude must be finite and >= 0");
    }
  }
  std::vector<NoiseBand> sorted = noise;
  std::sort(sorted.begin(), sorted.end(),
            [](const NoiseBand& a, const NoiseBand& b) { return a.lowHz < b.lowHz; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& nb = sorted[i];
    if (!(nb.lowHz >= 0.0 && nb.lowHz < nb.highHz && nb.highHz < nyquist)) {
      throw ConfigError("envelope.noise", fmt::format("band [{}, {}] Hz outside [0, {})", nb.lowHz,
                                                      nb.highHz, nyquist));
    }
    if (!(nb.amplitude >= 0.0) || !std::isfinite(nb.amplitude)) {
      throw ConfigError("envelope.noise", "amplitude must be finite and >= 0");
    }
    if (i > 0 && nb.lowHz < sorted[i - 1].highHz) {
      throw ConfigError("envelope.noise", "noise bands overlap");
    }
  }
}

double SpectralEnvelope::peak_bound() const noexcept {
  double peak = 0.0;
  for (const auto& p : partials) peak += p.amplitude;
  double var = 0.0;
  for (const auto& nb : noise) var += nb.rms() * nb.rms();
  return peak + kNoiseCrest * std::sqrt(var);
}

std::array<SpectralEnvelope, 4> default_envelopes() {
  const std::vector<Partial> motor = {{100.0, 0.4}, {200.0, 0.3}, {400.0, 0.2}, {1000.0, 0.1}};
  std::array<SpectralEnvelope, 4> env;
  env[static_cast<std::size_t>(AcousticState::PumpActiveNormal)] = {motor, {{0.0, 20000.0, 0.02}}};
  env[static_cast<std::size_t>(AcousticState::PumpInactiveNormal)] = {{}, {{0.0, 2000.0, 0.01}}};
  // Dry run: cavitation-like broadband noise on top of the motor.
  env[static_cast<std::size_t>(AcousticState::PumpActiveDry)] = {
      motor, {{0.0, 4000.0, 0.02}, {4000.0, 20000.0, std::hypot(0.1, 0.02)}}};
  // Open release valve: rushing water above 5 kHz.
  env[static_cast<std::size_t>(AcousticState::PumpInactiveReflow)] = {
      {}, {{0.0, 2000.0, 0.01}, {5000.0, 20000.0, 0.08}}};
  return env;
}

void SynthConfig::validate() const {
  if (!(sampleRate / 2.0 > 19000.0)) {
    throw ConfigError("synth.sample_rate",
                      fmt::format("Nyquist must exceed 19000 Hz (got rate {})", sampleRate));
  }
  if (!(transitionRampMs >= 0.0) || !std::isfinite(transitionRampMs)) {
    throw ConfigError("synth.ramp_ms", "must be finite and >= 0");
  }
  for (const auto& e : envelopes) e.validate(sampleRate);
}

double SynthConfig::output_gain() const noexcept {
  double bound = 0.0;
  for (const auto& e : envelopes) bound = std::max(bound, e.peak_bound());
  return 1.0 / std::max(1.0, bound);
}

std::size_t SynthConfig::ramp_samples() const noexcept {
  return static_cast<std::size_t>(std::llround(transitionRampMs * sampleRate / 1000.0));
}

AcousticState acoustic_state_of(const process::ProcessState& state) {
  if (state.pumpDry) return AcousticState::PumpActiveDry;
  if (state.pumpOn) return AcousticState::PumpActiveNormal;
  if (state.valveOpen) return AcousticState::PumpInactiveReflow;
  return AcousticState::PumpInactiveNormal;
}

std::vector<float> synthesize_block(AcousticState state, const SynthConfig& config,
                                    std::size_t nSamples, SynthCursor& cursor) {
  if (nSamples == 0) throw InvalidArgument("synthesize_block: nSamples must be > 0");
  config.validate();
  StateRenderer renderer(config);
  const double gain = config.output_gain();
  std::vector<double> raw(nSamples);
  renderer.render(state, cursor.position, raw);
  std::vector<float> out(nSamples);
  for (std::size_t i = 0; i < nSamples; ++i) {
    out[i] = finish_sample(raw[i], gain, cursor.position + i);
  }
  cursor.position += nSamples;
  return out;
}

AcousticState RenderedAudio::label_at(std::uint64_t sampleIndex) const {
  if (labels.empty()) throw InvalidArgument("rendered audio carries no labels");
  auto it = std::upper_bound(labels.begin(), labels.end(), sampleIndex,
                             [](std::uint64_t v, const LabelChange& c) { return v < c.sampleIndex; });
  if (it == labels.begin()) return labels.front().state;
  return std::prev(it)->state;
}

std::vector<AcousticState> RenderedAudio::expand_labels() const {
  std::vector<AcousticState> out(samples.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t b = std::min<std::size_t>(labels[i].sampleIndex, out.size());
    const std::size_t e = i + 1 < labels.size()
                              ? std::min<std::size_t>(labels[i + 1].sampleIndex, out.size())
                              : out.size();
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(b), out.begin() + static_cast<std::ptrdiff_t>(e),
              labels[i].state);
  }
  return out;
}

std::vector<TickSpan> tick_spans(std::span<const process::TelemetryFrame> trace, double sampleRate) {
  if (trace.empty()) throw InvalidArgument("trace is empty");
  const double dt = trace.size() > 1 ? trace[1].t - trace[0].t : trace[0].t;
  if (!(dt > 0.0)) throw InvalidArgument("trace frames must be time-ordered with positive spacing");
  std::vector<TickSpan> spans(trace.size());
  double prevT = trace[0].t - dt;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (i > 0 && !(trace[i].t > trace[i - 1].t)) {
      throw InvalidArgument(fmt::format("trace not time-ordered at frame {}", i));
    }
    const auto b = std::llround(prevT * sampleRate);
    const auto e = std::llround(trace[i].t * sampleRate);
    spans[i] = {static_cast<std::uint64_t>(std::max<long long>(b, 0)),
                static_cast<std::uint64_t>(std::max<long long>(e, 0))};
    prevT = trace[i].t;
  }
  return spans;
}

RenderedAudio render_trace(std::span<const process::TelemetryFrame> trace,
                           const SynthConfig& config) {
  config.validate();
  TraceRenderer r(state_segments(trace, config.sampleRate), config);
  RenderedAudio audio;
  audio.sampleRate = config.sampleRate;
  audio.samples.resize(r.length());
  r.render(0, r.length(), audio.samples);
  audio.labels = r.labels();
  return audio;
}

std::vector<float> render_trace_range(std::span<const process::TelemetryFrame> trace,
                                      const SynthConfig& config, std::uint64_t begin,
                                      std::uint64_t end) {
  config.validate();
  TraceRenderer r(state_segments(trace, config.sampleRate), config);
  end = std::min(end, r.length());
  if (begin >= end) return {};
  std::vector<float> out(end - begin);
  r.render(begin, end, out);
  return out;
}

}  // namespace sidechan::synth
