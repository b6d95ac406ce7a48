#include "sidechan/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "sidechan/error.hpp"

namespace sidechan::dsp {

namespace {

void require_power_of_two(std::size_t n, const char* what) {
  if (!is_power_of_two(n)) {
    throw InvalidArgument(fmt::format("{}: length {} is not a power of two", what, n));
  }
}

// Folds a full complex spectrum of a real frame into one-sided power bins.
PowerSpectrum fold_spectrum(std::span<const Complex> spectrum, double inputScale, double sampleRate,
                            std::size_t frameStart) {
  const std::size_t n = spectrum.size();
  const double tol = 1e-9 * std::max(1.0, inputScale);
  for (std::size_t k = 1; k < n / 2; ++k) {
    if (std::abs(spectrum[k] - std::conj(spectrum[n - k])) > tol) {
      throw std::logic_error(fmt::format("spectrum of real frame not conjugate-symmetric at bin {}", k));
    }
  }
  PowerSpectrum ps;
  ps.binWidth = sampleRate / static_cast<double>(n);
  ps.frameStart = frameStart;
  ps.bins.resize(n / 2 + 1);
  const double invN = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    double p = std::norm(spectrum[k]) * invN;
    if (k != 0 && k != n / 2) p *= 2.0;
    ps.bins[k] = p;
  }
  return ps;
}

}  // namespace

std::string_view to_string(Window w) {
  return w == Window::Hann ? "hann" : "rectangular";
}

Window parse_window(std::string_view name) {
  if (name == "hann") return Window::Hann;
  if (name == "rectangular" || name == "rect") return Window::Rectangular;
  throw ConfigError("frames.window", fmt::format("unknown window '{}' (hann|rectangular)", name));
}

void FrameSpec::validate() const {
  if (!is_power_of_two(frameLen) || frameLen < 2) {
    throw ConfigError("frames.len", fmt::format("must be a power of two >= 2 (got {})", frameLen));
  }
  if (hop == 0 || hop > frameLen) {
    throw ConfigError("frames.hop", fmt::format("must satisfy 0 < hop <= len (got {})", hop));
  }
}

double PowerSpectrum::total() const noexcept {
  return std::accumulate(bins.begin(), bins.end(), 0.0);
}

std::vector<Band> default_bands() {
  return {{5000.0, 250.0}, {10000.0, 250.0}, {19000.0, 250.0}};
}

bool is_power_of_two(std::size_t n) noexcept {
  return n != 0 && (n & (n - 1)) == 0;
}

std::vector<double> make_window(Window w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  if (w == Window::Hann && n > 1) {
    const double denom = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom));
    }
  }
  return out;
}

FftPlan::FftPlan(std::size_t n) : n_(n) {
  require_power_of_two(n, "fft");
  bitrev_.resize(n);
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) {
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    }
    bitrev_[i] = r;
  }
  twiddles_.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddles_[k] = Complex(std::cos(angle), std::sin(angle));
  }
}

void FftPlan::transform(std::span<Complex> data, bool inverse) const {
  if (data.size() != n_) {
    throw InvalidArgument(fmt::format("fft plan for {} points given {}", n_, data.size()));
  }
  for (std::size_t i = 0; i < n_; ++i) {
    if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        // Plain real arithmetic: std::complex operator* goes through the NaN-safe libcall.
        const Complex w = twiddles_[j * stride];
        const double wr = w.real();
        const double wi = inverse ? -w.imag() : w.imag();
        const Complex u = data[start + j];
        const Complex x = data[start + j + half];
        const double vr = x.real() * wr - x.imag() * wi;
        const double vi = x.real() * wi + x.imag() * wr;
        data[start + j] = Complex(u.real() + vr, u.imag() + vi);
        data[start + j + half] = Complex(u.real() - vr, u.imag() - vi);
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& x : data) x *= scale;
  }
}

std::vector<Complex> fft(std::span<const Complex> input, bool inverse) {
  FftPlan plan(input.size());
  std::vector<Complex> out(input.begin(), input.end());
  plan.transform(out, inverse);
  return out;
}

std::vector<Complex> dft_oracle(std::span<const Complex> input) {
  const std::size_t n = input.size();
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc(0.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      // Reduce k*j mod n first so the angle stays small and exact.
      const auto m = static_cast<double>((k * j) % n);
      const double angle = -2.0 * std::numbers::pi * m / static_cast<double>(n);
      acc += input[j] * Complex(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  return out;
}

std::size_t frame_count(std::size_t nSamples, const FrameSpec& spec) noexcept {
  if (nSamples < spec.frameLen || spec.hop == 0) return 0;
  return (nSamples - spec.frameLen) / spec.hop + 1;
}

std::vector<std::vector<double>> frames(std::span<const double> samples, const FrameSpec& spec) {
  spec.validate();
  if (samples.size() < spec.frameLen) {
    throw InvalidArgument(fmt::format("stream of {} samples is shorter than one frame ({})",
                                      samples.size(), spec.frameLen));
  }
  const auto window = make_window(spec.window, spec.frameLen);
  const std::size_t count = frame_count(samples.size(), spec);
  std::vector<std::vector<double>> out(count, std::vector<double>(spec.frameLen));
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t offset = k * spec.hop;
    for (std::size_t i = 0; i < spec.frameLen; ++i) {
      out[k][i] = samples[offset + i] * window[i];
    }
  }
  return out;
}

PowerSpectrum power_spectrum(std::span<const double> frame, double sampleRate,
                             std::size_t frameStart) {
  require_power_of_two(frame.size(), "power_spectrum");
  double scale = 0.0;
  std::vector<Complex> buf(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (!std::isfinite(frame[i])) {
      throw CorruptState(fmt::format("non-finite sample at frame offset {}", i));
    }
    buf[i] = Complex(frame[i], 0.0);
    scale += std::abs(frame[i]);
  }
  FftPlan(frame.size()).transform(buf, false);
  return fold_spectrum(buf, scale, sampleRate, frameStart);
}

double band_energy(const PowerSpectrum& ps, double centerHz, double halfWidthHz) {
  const double lo = centerHz - halfWidthHz;
  const double hi = centerHz + halfWidthHz;
  if (!(halfWidthHz >= 0.0) || lo < 0.0 || hi > ps.nyquist()) {
    throw InvalidArgument(fmt::format("band [{}, {}] Hz outside [0, {}] Hz", lo, hi, ps.nyquist()));
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < ps.bins.size(); ++k) {
    const double f = ps.frequency(k);
    if (f >= lo && f <= hi) sum += ps.bins[k];
  }
  return sum;
}

double high_band_ratio(const PowerSpectrum& ps, double cutoffHz) {
  double above = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < ps.bins.size(); ++k) {
    total += ps.bins[k];
    if (ps.frequency(k) > cutoffHz) above += ps.bins[k];
  }
  if (total <= 0.0) return 0.0;
  return std::clamp(above / total, 0.0, 1.0);
}

double band_rms(const PowerSpectrum& ps, double lowHz, double highHz, double windowPower) {
  double sum = 0.0;
  for (std::size_t k = 0; k < ps.bins.size(); ++k) {
    const double f = ps.frequency(k);
    if (f >= lowHz && f < highHz) sum += ps.bins[k];
  }
  return windowPower > 0.0 ? std::sqrt(sum / windowPower) : 0.0;
}

BandFeatures features(const PowerSpectrum& ps, std::span<const Band> bands) {
  BandFeatures f;
  f.logBandEnergies.reserve(bands.size());
  for (const Band& b : bands) {
    f.logBandEnergies.push_back(10.0 * std::log10(band_energy(ps, b.centerHz, b.halfWidthHz) +
                                                  kEnergyFloor));
  }
  f.highBandRatio4k = high_band_ratio(ps, kAttack1CutoffHz);
  f.highBandRatio5k = high_band_ratio(ps, kAttack2CutoffHz);
  return f;
}

SpectrumAnalyzer::SpectrumAnalyzer(FrameSpec spec, double sampleRate)
    : spec_(spec), sampleRate_(sampleRate), plan_((spec.validate(), spec.frameLen)) {
  if (!(sampleRate > 0.0)) throw ConfigError("sample_rate", "must be > 0");
  window_ = make_window(spec_.window, spec_.frameLen);
  windowPower_ = std::inner_product(window_.begin(), window_.end(), window_.begin(), 0.0);
}

PowerSpectrum SpectrumAnalyzer::analyze(std::span<const float> samples,
                                        std::size_t frameIndex) const {
  const std::size_t start = frameIndex * spec_.hop;
  if (start + spec_.frameLen > samples.size()) {
    throw InvalidArgument(fmt::format("frame {} runs past the end of the stream", frameIndex));
  }
  std::vector<Complex> buf(spec_.frameLen);
  double scale = 0.0;
  for (std::size_t i = 0; i < spec_.frameLen; ++i) {
    const double x = samples[start + i];
    if (!std::isfinite(x)) {
      throw CorruptState(fmt::format("non-finite sample at index {}", start + i));
    }
    buf[i] = Complex(x * window_[i], 0.0);
    scale += std::abs(x);
  }
  plan_.transform(buf, false);
  return fold_spectrum(buf, scale, sampleRate_, start);
}

}  // namespace sidechan::dsp
