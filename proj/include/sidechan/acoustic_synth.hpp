#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sidechan/process_sim.hpp"

namespace sidechan::synth {

enum class AcousticState : std::uint8_t {
  PumpActiveNormal = 0,
  PumpInactiveNormal = 1,
  PumpActiveDry = 2,
  PumpInactiveReflow = 3,
};

inline constexpr std::array<AcousticState, 4> kAllAcousticStates = {
    AcousticState::PumpActiveNormal, AcousticState::PumpInactiveNormal,
    AcousticState::PumpActiveDry, AcousticState::PumpInactiveReflow};

std::string_view to_string(AcousticState s);
std::optional<AcousticState> parse_acoustic_state(std::string_view name);

constexpr bool is_pump_active(AcousticState s) noexcept {
  return s == AcousticState::PumpActiveNormal || s == AcousticState::PumpActiveDry;
}

struct Partial {
  double frequencyHz = 0.0;
  double amplitude = 0.0;  // sine peak amplitude
};

/// Band-limited Gaussian noise. `amplitude` is RMS per sqrt(kHz) of band width, so the
/// band's total RMS is amplitude * sqrt((highHz - lowHz) / 1000).
struct NoiseBand {
  double lowHz = 0.0;
  double highHz = 0.0;
  double amplitude = 0.0;

  double rms() const noexcept;
};

struct SpectralEnvelope {
  std::vector<Partial> partials;
  std::vector<NoiseBand> noise;

  void validate(double sampleRate) const;
  /// Sum of partial peaks plus four noise standard deviations.
  double peak_bound() const noexcept;
};

std::array<SpectralEnvelope, 4> default_envelopes();

struct SynthConfig {
  double sampleRate = 48000.0;
  std::uint64_t seed = 0;
  std::array<SpectralEnvelope, 4> envelopes = default_envelopes();
  double transitionRampMs = 20.0;

  void validate() const;
  const SpectralEnvelope& envelope(AcousticState s) const {
    return envelopes[static_cast<std::size_t>(s)];
  }
  /// Fixed output gain shared by every state so that rendered levels stay comparable.
  double output_gain() const noexcept;
  std::size_t ramp_samples() const noexcept;
};

/// Absolute sample position of a stream. Oscillator phase and noise state are pure functions
/// of this position, so carrying it across calls is enough to render without clicks.
struct SynthCursor {
  std::uint64_t position = 0;
};

AcousticState acoustic_state_of(const process::ProcessState& state);

/// Renders `nSamples` in a single acoustic state starting at `cursor` and advances it.
/// Throws ClippingError when the pre-normalisation peak exceeds 10.
std::vector<float> synthesize_block(AcousticState state, const SynthConfig& config,
                                    std::size_t nSamples, SynthCursor& cursor);

struct LabelChange {
  std::uint64_t sampleIndex = 0;
  AcousticState state = AcousticState::PumpInactiveNormal;
  bool operator==(const LabelChange&) const = default;
};

struct RenderedAudio {
  double sampleRate = 0.0;
  std::vector<float> samples;
  std::vector<LabelChange> labels;  // one entry per state change, first at index 0

  AcousticState label_at(std::uint64_t sampleIndex) const;
  /// Per-sample ground truth, expanded from `labels`.
  std::vector<AcousticState> expand_labels() const;
};

/// Sample range [begin, end) covered by tick `i` of a trace.
struct TickSpan {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};
std::vector<TickSpan> tick_spans(std::span<const process::TelemetryFrame> trace, double sampleRate);

/// Renders the acoustic stream of a telemetry trace using each frame's true state.
/// State changes are cross-faded linearly over `transitionRampMs`.
RenderedAudio render_trace(std::span<const process::TelemetryFrame> trace,
                           const SynthConfig& config);

/// Same as render_trace but only for sample indices [begin, end) of the full render.
/// Equal bit-for-bit to the corresponding slice of render_trace.
std::vector<float> render_trace_range(std::span<const process::TelemetryFrame> trace,
                                      const SynthConfig& config, std::uint64_t begin,
                                      std::uint64_t end);

}  // namespace sidechan::synth
