#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "melex/dsp.hpp"

namespace melex {

struct CfpConfig {
  std::array<double, 3> gamma{0.24, 0.6, 1.0};  // power compression for Z0/Z1/Z2
  double freq_cutoff_hz = 32.7;                 // W_f high-pass
  double quef_cutoff_s = 1.0 / 1760.0;          // W_t high-pass
  int log_bins_per_octave = 60;
  double log_f_low = 73.416;
  double log_f_high = 1760.0;
  // Pipeline log mapping: cubic resampling at bin centers (sub-bin accurate)
  // vs the plain scatter-to-nearest-bin mapping of to_log_frequency.
  bool cubic_log_resample = true;

  std::size_t log_bin_count() const;
  std::vector<double> log_axis() const;
  void validate(double sample_rate) const;
};

constexpr std::size_t kPatchSize = 25;

enum class PatchLabel { negative = 0, positive = 1, unknown = 2 };

/// 25x25 window of a log-frequency map centered on a per-frame salience peak.
struct Patch {
  std::array<double, kPatchSize * kPatchSize> values{};  // [bin offset][frame offset]
  std::size_t center_bin = 0;
  std::size_t center_frame = 0;
  double center_hz = 0.0;
  PatchLabel label = PatchLabel::unknown;

  double at(std::size_t row, std::size_t col) const { return values[row * kPatchSize + col]; }
};

/// W_f high-pass + gamma0 compression of a linear-frequency magnitude map.
TimeFrequencyMap make_z0(const TimeFrequencyMap& spectrogram, const CfpConfig& cfg);

/// Z1 = sigma1(W_t F^-1 Z0): per frame, inverse transform of the symmetric
/// spectrum, low quefrencies zeroed, rectified power compression.
TimeFrequencyMap generalized_cepstrum(const TimeFrequencyMap& z0, const CfpConfig& cfg);

/// Z2 = sigma2(W_f F Z1): forward transform back to frequency, low bins zeroed.
TimeFrequencyMap generalized_cepstrum_of_spectrogram(const TimeFrequencyMap& z1,
                                                     const CfpConfig& cfg);

/// Scatter mapping onto the log axis: every source bin lands in the log bin
/// nearest its frequency, each log bin keeps the max, unhit bins are 0.
TimeFrequencyMap to_log_frequency(const TimeFrequencyMap& map, const CfpConfig& cfg);

/// Resampling onto the log axis: each log bin evaluates the source map at its
/// center via Catmull-Rom interpolation (clamped to >= 0). Sub-bin accurate,
/// which the scatter mapping is not; the pipeline default.
TimeFrequencyMap resample_log_frequency(const TimeFrequencyMap& map, const CfpConfig& cfg);

/// Y = Z1_log * Z2_log elementwise.
TimeFrequencyMap combine_cfp(const TimeFrequencyMap& z1_log, const TimeFrequencyMap& z2_log);

struct CfpMaps {
  TimeFrequencyMap z0, z1, z2, z1_log, z2_log, y;
};

CfpMaps compute_cfp(const AudioClip& clip, const StftConfig& stft_cfg, const CfpConfig& cfg);
TimeFrequencyMap compute_cfp_map(const AudioClip& clip, const StftConfig& stft_cfg,
                                 const CfpConfig& cfg);

/// One patch per frame, centered on the frame's argmax bin. With truth given,
/// label 1 iff the frame is voiced and the center is within tolerance_cents.
std::vector<Patch> select_patches(const TimeFrequencyMap& y, const PitchContour* truth,
                                  double tolerance_cents);

/// Keeps every positive patch and each negative independently with
/// probability `rate` under the seeded generator.
std::vector<Patch> subsample_nonvocal(const std::vector<Patch>& patches, double rate,
                                      std::uint64_t seed);

}  // namespace melex
