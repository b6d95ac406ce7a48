#include "sidechan/harness/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "sidechan/error.hpp"

namespace sidechan::harness {

namespace {

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::int16_t to_pcm16(float x) noexcept {
  const double scaled = std::nearbyint(static_cast<double>(x) * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

void quantize_pcm16(std::span<float> samples) noexcept {
  for (float& s : samples) s = from_pcm16(to_pcm16(s));
}

void write_wav(const std::filesystem::path& path, std::uint32_t sampleRate,
               std::span<const float> samples) {
  const std::uint64_t dataBytes = wav_data_bytes(samples.size());
  if (dataBytes > 0xffffffffULL - 36) {
    throw InvalidArgument(fmt::format("{} samples do not fit a RIFF file", samples.size()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));

  std::string header;
  header.append("RIFF");
  put_u32(header, static_cast<std::uint32_t>(36 + dataBytes));
  header.append("WAVE");
  header.append("fmt ");
  put_u32(header, 16);
  put_u16(header, 1);  // PCM
  put_u16(header, 1);  // mono
  put_u32(header, sampleRate);
  put_u32(header, sampleRate * 2);
  put_u16(header, 2);
  put_u16(header, 16);
  header.append("data");
  put_u32(header, static_cast<std::uint32_t>(dataBytes));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  std::vector<char> buf;
  constexpr std::size_t kChunk = 1 << 16;
  for (std::size_t off = 0; off < samples.size(); off += kChunk) {
    const std::size_t n = std::min(kChunk, samples.size() - off);
    buf.resize(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = static_cast<std::uint16_t>(to_pcm16(samples[off + i]));
      buf[2 * i] = static_cast<char>(v & 0xff);
      buf[2 * i + 1] = static_cast<char>(v >> 8);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open WAV '{}'", path.string()));
  std::array<unsigned char, 12> riff{};
  if (!in.read(reinterpret_cast<char*>(riff.data()), riff.size()) ||
      std::memcmp(riff.data(), "RIFF", 4) != 0 || std::memcmp(riff.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(fmt::format("'{}' is not a RIFF/WAVE file", path.string()));
  }

  WavData wav;
  bool haveFmt = false;
  while (true) {
    std::array<unsigned char, 8> ch{};
    if (!in.read(reinterpret_cast<char*>(ch.data()), ch.size())) {
      throw FormatError(fmt::format("'{}': no data chunk", path.string()));
    }
    const std::uint32_t size = get_u32(ch.data() + 4);
    if (std::memcmp(ch.data(), "fmt ", 4) == 0) {
      if (size < 16) throw FormatError("fmt chunk too short");
      std::vector<unsigned char> f(size);
      if (!in.read(reinterpret_cast<char*>(f.data()), size)) throw FormatError("truncated fmt chunk");
      const std::uint16_t tag = get_u16(f.data());
      const std::uint16_t channels = get_u16(f.data() + 2);
      wav.sampleRate = get_u32(f.data() + 4);
      const std::uint16_t bits = get_u16(f.data() + 14);
      if (tag != 1 || channels != 1 || bits != 16) {
        throw UnsupportedFormat(fmt::format(
            "'{}': only PCM16 mono is supported (format {}, {} channels, {} bits)", path.string(),
            tag, channels, bits));
      }
      haveFmt = true;
      if (size % 2) in.ignore(1);
    } else if (std::memcmp(ch.data(), "data", 4) == 0) {
      if (!haveFmt) throw FormatError("data chunk before fmt chunk");
      const std::size_t n = size / 2;
      std::vector<unsigned char> raw(static_cast<std::size_t>(size));
      if (!in.read(reinterpret_cast<char*>(raw.data()), size)) throw FormatError("truncated data chunk");
      wav.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        wav.samples[i] = from_pcm16(static_cast<std::int16_t>(get_u16(raw.data() + 2 * i)));
      }
      return wav;
    } else {
      in.ignore(size + (size % 2));
    }
  }
}

}  // namespace sidechan::harness
