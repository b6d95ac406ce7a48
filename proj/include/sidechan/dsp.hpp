#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace sidechan::dsp {

using Complex = std::complex<double>;

enum class Window { Hann, Rectangular };

std::string_view to_string(Window w);
Window parse_window(std::string_view name);

struct FrameSpec {
  std::size_t frameLen = 4096;
  std::size_t hop = 2048;
  Window window = Window::Hann;

  void validate() const;
  bool operator==(const FrameSpec&) const = default;
};

/// One-sided power spectrum of a single frame.
struct PowerSpectrum {
  std::vector<double> bins;  // frameLen/2 + 1 values
  double binWidth = 0.0;     // Hz
  std::size_t frameStart = 0;

  std::size_t frame_len() const noexcept { return bins.empty() ? 0 : (bins.size() - 1) * 2; }
  double nyquist() const noexcept { return binWidth * static_cast<double>(bins.size() - 1); }
  double frequency(std::size_t k) const noexcept { return binWidth * static_cast<double>(k); }
  double total() const noexcept;
};

struct Band {
  double centerHz = 0.0;
  double halfWidthHz = 0.0;
  bool operator==(const Band&) const = default;
};

/// 5, 10 and 19 kHz, each +-250 Hz.
std::vector<Band> default_bands();

struct BandFeatures {
  std::vector<double> logBandEnergies;  // dB
  double highBandRatio4k = 0.0;
  double highBandRatio5k = 0.0;
};

inline constexpr double kEnergyFloor = 1e-12;
inline constexpr double kAttack1CutoffHz = 4000.0;
inline constexpr double kAttack2CutoffHz = 5000.0;

bool is_power_of_two(std::size_t n) noexcept;

/// Symmetric Hann: w[n] = 0.5 * (1 - cos(2*pi*n / (N-1))).
std::vector<double> make_window(Window w, std::size_t n);

/// Precomputed radix-2 transform for one length.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  /// In place. Forward: X[k] = sum x[n] e^{-2 pi i k n / N}; inverse scales by 1/N.
  void transform(std::span<Complex> data, bool inverse) const;

 private:
  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<Complex> twiddles_;  // e^{-2 pi i k / N}, k < N/2
};

std::vector<Complex> fft(std::span<const Complex> input, bool inverse = false);

/// Direct O(N^2) evaluation of the transform definition, any length >= 1.
std::vector<Complex> dft_oracle(std::span<const Complex> input);

std::size_t frame_count(std::size_t nSamples, const FrameSpec& spec) noexcept;

/// All windowed frames; meant for short signals (use SpectrumAnalyzer for long streams).
std::vector<std::vector<double>> frames(std::span<const double> samples, const FrameSpec& spec);

/// Power spectrum of an already-windowed real frame.
PowerSpectrum power_spectrum(std::span<const double> frame, double sampleRate,
                             std::size_t frameStart = 0);

/// Sum of bins whose centre lies in [center - halfWidth, center + halfWidth].
double band_energy(const PowerSpectrum& ps, double centerHz, double halfWidthHz);

/// Energy of bins strictly above `cutoffHz` over total energy; 0 for a silent frame.
double high_band_ratio(const PowerSpectrum& ps, double cutoffHz);

/// RMS of the signal content with frequency in [lowHz, highHz), corrected for window power.
double band_rms(const PowerSpectrum& ps, double lowHz, double highHz, double windowPower);

BandFeatures features(const PowerSpectrum& ps, std::span<const Band> bands);

/// Reusable framing + windowing + spectrum pipeline for long sample streams.
class SpectrumAnalyzer {
 public:
  SpectrumAnalyzer(FrameSpec spec, double sampleRate);

  const FrameSpec& spec() const noexcept { return spec_; }
  double sample_rate() const noexcept { return sampleRate_; }
  /// Sum of squared window coefficients.
  double window_power() const noexcept { return windowPower_; }

  PowerSpectrum analyze(std::span<const float> samples, std::size_t frameIndex) const;

 private:
  FrameSpec spec_;
  double sampleRate_;
  std::vector<double> window_;
  double windowPower_ = 0.0;
  FftPlan plan_;
};

}  // namespace sidechan::dsp
