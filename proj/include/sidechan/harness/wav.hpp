#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace sidechan::harness {

struct WavData {
  std::uint32_t sampleRate = 0;
  std::vector<float> samples;  // pcm / 32768
};

/// Rounds to the nearest PCM16 code; float -> int16 -> float is then lossless.
std::int16_t to_pcm16(float x) noexcept;
inline float from_pcm16(std::int16_t v) noexcept { return static_cast<float>(v) / 32768.0f; }
void quantize_pcm16(std::span<float> samples) noexcept;

inline constexpr std::uint64_t wav_data_bytes(std::uint64_t nSamples) { return nSamples * 2; }

/// PCM signed 16-bit, mono, little-endian.
void write_wav(const std::filesystem::path& path, std::uint32_t sampleRate,
               std::span<const float> samples);
/// Accepts only PCM16 mono; anything else raises UnsupportedFormat.
WavData read_wav(const std::filesystem::path& path);

}  // namespace sidechan::harness
