#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "melex/audio_io.hpp"

namespace melex {

enum class AxisKind { linear_frequency, quefrency, log_frequency };

/// Real matrix [bins x frames] with per-bin physical axis values
/// (Hz for frequency axes, seconds for quefrency).
struct TimeFrequencyMap {
  std::vector<double> values;  // values[bin * frames + frame]
  std::size_t bins = 0;
  std::size_t frames = 0;
  AxisKind axis_kind = AxisKind::linear_frequency;
  std::vector<double> axis_values;
  double hop_seconds = 0.0;
  double start_seconds = 0.0;  // center time of frame 0

  static TimeFrequencyMap zeros(std::size_t bins, std::size_t frames);

  double& at(std::size_t bin, std::size_t frame) { return values[bin * frames + frame]; }
  double at(std::size_t bin, std::size_t frame) const { return values[bin * frames + frame]; }

  double frame_time(std::size_t frame) const {
    return start_seconds + static_cast<double>(frame) * hop_seconds;
  }
  /// Argmax bin of one frame; lowest index wins ties.
  std::size_t argmax_bin(std::size_t frame) const;
};

struct StftConfig {
  std::size_t window_size = 1024;
  std::size_t hop = 80;
  int sample_rate = 8000;
};

/// In-place radix-2 FFT; size must be a power of two. Inverse includes the 1/N factor.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

/// w[i] = 0.5 * (1 - cos(2*pi*i / (n-1))); endpoints are exactly 0. n >= 2.
std::vector<double> hann_window(std::size_t n);

enum class SpectrogramScale { magnitude, log_magnitude };

/// Frames of `1 + floor((len - window) / hop)`, no padding; bins = window/2 + 1.
/// Log mode stores ln(1 + |X|).
TimeFrequencyMap stft_magnitude(const AudioClip& clip, const StftConfig& cfg,
                                SpectrogramScale scale = SpectrogramScale::magnitude);

/// Per-frame autocorrelation pitch tracker. The frame autocorrelation is
/// computed through the power spectrum of the zero-padded windowed frame;
/// the in-range lag peak is refined by parabolic interpolation and the frame
/// is voiced when r(lag)/r(0) clears the threshold.
PitchContour autocorr_pitch(const AudioClip& clip, const StftConfig& cfg,
                            double f_min = 73.416, double f_max = 1760.0,
                            double voicing_threshold = 0.4);

}  // namespace melex
