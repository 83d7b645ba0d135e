#include "melex/cfp.hpp"

#include <algorithm>
#include <cmath>

#include "melex/errors.hpp"
#include "melex/rng.hpp"

namespace melex {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

double sigma(double x, double gamma) {
  const double r = std::max(x, 0.0);
  return gamma == 1.0 ? r : std::pow(r, gamma);
}

std::size_t full_transform_size(const TimeFrequencyMap& map) {
  if (map.bins < 2) throw ShapeError("cfp: map needs at least 2 bins");
  const std::size_t n = 2 * (map.bins - 1);
  if (!is_power_of_two(n)) throw ShapeError("cfp: transform size must be a power of two");
  return n;
}

/// Mirror a half spectrum (bins 0..N/2) to the full symmetric N-point vector.
void mirror_half(const TimeFrequencyMap& map, std::size_t frame,
                 std::vector<std::complex<double>>& full) {
  const std::size_t n = full.size();
  const std::size_t half = map.bins - 1;  // N/2
  for (std::size_t k = 0; k <= half; ++k) full[k] = map.at(k, frame);
  for (std::size_t k = half + 1; k < n; ++k) full[k] = map.at(n - k, frame);
}

void copy_axis_meta(const TimeFrequencyMap& src, TimeFrequencyMap& dst) {
  dst.hop_seconds = src.hop_seconds;
  dst.start_seconds = src.start_seconds;
}

double source_frequency(AxisKind kind, double axis_value) {
  if (kind == AxisKind::quefrency) {
    return axis_value > 0.0 ? 1.0 / axis_value : -1.0;
  }
  return axis_value;
}

double catmull_rom(const std::vector<double>& v, std::size_t stride, std::size_t offset,
                   std::size_t count, double pos) {
  const auto i = static_cast<std::int64_t>(std::floor(pos));
  const double t = pos - static_cast<double>(i);
  auto sample = [&](std::int64_t j) {
    j = std::clamp<std::int64_t>(j, 0, static_cast<std::int64_t>(count) - 1);
    return v[static_cast<std::size_t>(j) * stride + offset];
  };
  const double p0 = sample(i - 1), p1 = sample(i), p2 = sample(i + 1), p3 = sample(i + 2);
  return 0.5 * (2.0 * p1 + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t);
}

}  // namespace

std::size_t CfpConfig::log_bin_count() const {
  const double octaves = std::log2(log_f_high / log_f_low);
  return static_cast<std::size_t>(
      std::ceil(static_cast<double>(log_bins_per_octave) * octaves - 1e-9));
}

std::vector<double> CfpConfig::log_axis() const {
  const std::size_t n = log_bin_count();
  std::vector<double> axis(n);
  for (std::size_t p = 0; p < n; ++p) {
    axis[p] = log_f_low * std::pow(2.0, static_cast<double>(p) / log_bins_per_octave);
  }
  return axis;
}

void CfpConfig::validate(double sample_rate) const {
  if (!(gamma[0] > 0.0 && gamma[1] > 0.0 && gamma[2] > 0.0)) {
    throw std::invalid_argument("cfp: all gamma must be > 0");
  }
  if (!(freq_cutoff_hz > 0.0 && freq_cutoff_hz < log_f_low && log_f_low < log_f_high &&
        log_f_high <= sample_rate / 2.0)) {
    throw std::invalid_argument("cfp: need 0 < freq_cutoff < f_low < f_high <= fs/2");
  }
  if (!(quef_cutoff_s > 0.0)) throw std::invalid_argument("cfp: quef_cutoff_s must be > 0");
  if (log_bins_per_octave <= 0) throw std::invalid_argument("cfp: bins per octave must be > 0");
}

TimeFrequencyMap make_z0(const TimeFrequencyMap& spectrogram, const CfpConfig& cfg) {
  if (spectrogram.axis_kind != AxisKind::linear_frequency) {
    throw ShapeError("make_z0: expected a linear-frequency map");
  }
  TimeFrequencyMap z0 = spectrogram;
  for (std::size_t k = 0; k < z0.bins; ++k) {
    const bool cut = z0.axis_values[k] < cfg.freq_cutoff_hz;
    for (std::size_t t = 0; t < z0.frames; ++t) {
      z0.at(k, t) = cut ? 0.0 : sigma(z0.at(k, t), cfg.gamma[0]);
    }
  }
  return z0;
}

TimeFrequencyMap generalized_cepstrum(const TimeFrequencyMap& z0, const CfpConfig& cfg) {
  if (z0.axis_kind != AxisKind::linear_frequency) {
    throw ShapeError("generalized_cepstrum: expected a linear-frequency map");
  }
  const std::size_t n = full_transform_size(z0);
  const double fs = z0.axis_values[1] * static_cast<double>(n);  // axis step = fs/N

  TimeFrequencyMap z1 = TimeFrequencyMap::zeros(z0.bins, z0.frames);
  z1.axis_kind = AxisKind::quefrency;
  z1.axis_values.resize(z0.bins);
  for (std::size_t q = 0; q < z0.bins; ++q) z1.axis_values[q] = static_cast<double>(q) / fs;
  copy_axis_meta(z0, z1);

  std::vector<std::complex<double>> full(n);
  for (std::size_t t = 0; t < z0.frames; ++t) {
    mirror_half(z0, t, full);
    fft_inplace(full, true);
    for (std::size_t q = 0; q < z1.bins; ++q) {
      if (z1.axis_values[q] < cfg.quef_cutoff_s) continue;  // W_t
      z1.at(q, t) = sigma(full[q].real(), cfg.gamma[1]);
    }
  }
  return z1;
}

TimeFrequencyMap generalized_cepstrum_of_spectrogram(const TimeFrequencyMap& z1,
                                                     const CfpConfig& cfg) {
  if (z1.axis_kind != AxisKind::quefrency) {
    throw ShapeError("generalized_cepstrum_of_spectrogram: expected a quefrency map");
  }
  const std::size_t n = full_transform_size(z1);
  const double fs = 1.0 / z1.axis_values[1];

  TimeFrequencyMap z2 = TimeFrequencyMap::zeros(z1.bins, z1.frames);
  z2.axis_kind = AxisKind::linear_frequency;
  z2.axis_values.resize(z1.bins);
  for (std::size_t k = 0; k < z1.bins; ++k) {
    z2.axis_values[k] = static_cast<double>(k) * fs / static_cast<double>(n);
  }
  copy_axis_meta(z1, z2);

  std::vector<std::complex<double>> full(n);
  for (std::size_t t = 0; t < z1.frames; ++t) {
    mirror_half(z1, t, full);
    fft_inplace(full, false);
    for (std::size_t k = 0; k < z2.bins; ++k) {
      if (z2.axis_values[k] < cfg.freq_cutoff_hz) continue;  // W_f
      z2.at(k, t) = sigma(full[k].real(), cfg.gamma[2]);
    }
  }
  return z2;
}

TimeFrequencyMap to_log_frequency(const TimeFrequencyMap& map, const CfpConfig& cfg) {
  if (map.axis_kind == AxisKind::log_frequency) {
    throw ShapeError("to_log_frequency: input is already log-frequency");
  }
  const std::size_t n_bins = cfg.log_bin_count();
  TimeFrequencyMap out = TimeFrequencyMap::zeros(n_bins, map.frames);
  out.axis_kind = AxisKind::log_frequency;
  out.axis_values = cfg.log_axis();
  copy_axis_meta(map, out);

  const double bpo = cfg.log_bins_per_octave;
  for (std::size_t j = 0; j < map.bins; ++j) {
    const double f = source_frequency(map.axis_kind, map.axis_values[j]);
    if (!(f > 0.0) || !std::isfinite(f)) continue;
    const auto p = static_cast<std::int64_t>(std::llround(bpo * std::log2(f / cfg.log_f_low)));
    if (p < 0 || p >= static_cast<std::int64_t>(n_bins)) continue;
    const auto pp = static_cast<std::size_t>(p);
    for (std::size_t t = 0; t < map.frames; ++t) {
      out.at(pp, t) = std::max(out.at(pp, t), map.at(j, t));
    }
  }
  return out;
}

TimeFrequencyMap resample_log_frequency(const TimeFrequencyMap& map, const CfpConfig& cfg) {
  if (map.axis_kind == AxisKind::log_frequency) {
    throw ShapeError("resample_log_frequency: input is already log-frequency");
  }
  if (map.bins < 2) throw ShapeError("resample_log_frequency: need at least 2 source bins");
  const std::size_t n_bins = cfg.log_bin_count();
  TimeFrequencyMap out = TimeFrequencyMap::zeros(n_bins, map.frames);
  out.axis_kind = AxisKind::log_frequency;
  out.axis_values = cfg.log_axis();
  copy_axis_meta(map, out);

  const double step = map.axis_values[1] - map.axis_values[0];  // uniform source axis
  for (std::size_t p = 0; p < n_bins; ++p) {
    const double fc = out.axis_values[p];
    // Position of this center on the source axis (quefrency axes index by period).
    const double target = map.axis_kind == AxisKind::quefrency ? 1.0 / fc : fc;
    const double pos = (target - map.axis_values[0]) / step;
    if (pos < 1.0 || pos > static_cast<double>(map.bins - 1)) continue;
    for (std::size_t t = 0; t < map.frames; ++t) {
      out.at(p, t) = std::max(0.0, catmull_rom(map.values, map.frames, t, map.bins, pos));
    }
  }
  return out;
}

TimeFrequencyMap combine_cfp(const TimeFrequencyMap& z1_log, const TimeFrequencyMap& z2_log) {
  if (z1_log.bins != z2_log.bins || z1_log.frames != z2_log.frames) {
    throw ShapeError("combine_cfp: shape mismatch");
  }
  if (z1_log.axis_kind != AxisKind::log_frequency ||
      z2_log.axis_kind != AxisKind::log_frequency || z1_log.axis_values != z2_log.axis_values) {
    throw ShapeError("combine_cfp: log axes differ");
  }
  TimeFrequencyMap y = z1_log;
  for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] *= z2_log.values[i];
  return y;
}

CfpMaps compute_cfp(const AudioClip& clip, const StftConfig& stft_cfg, const CfpConfig& cfg) {
  cfg.validate(static_cast<double>(stft_cfg.sample_rate));
  CfpMaps maps;
  const TimeFrequencyMap spec = stft_magnitude(clip, stft_cfg, SpectrogramScale::magnitude);
  maps.z0 = make_z0(spec, cfg);
  maps.z1 = generalized_cepstrum(maps.z0, cfg);
  maps.z2 = generalized_cepstrum_of_spectrogram(maps.z1, cfg);
  if (cfg.cubic_log_resample) {
    maps.z1_log = resample_log_frequency(maps.z1, cfg);
    maps.z2_log = resample_log_frequency(maps.z2, cfg);
  } else {
    maps.z1_log = to_log_frequency(maps.z1, cfg);
    maps.z2_log = to_log_frequency(maps.z2, cfg);
  }
  maps.y = combine_cfp(maps.z1_log, maps.z2_log);
  return maps;
}

TimeFrequencyMap compute_cfp_map(const AudioClip& clip, const StftConfig& stft_cfg,
                                 const CfpConfig& cfg) {
  return compute_cfp(clip, stft_cfg, cfg).y;
}

std::vector<Patch> select_patches(const TimeFrequencyMap& y, const PitchContour* truth,
                                  double tolerance_cents) {
  if (y.axis_kind != AxisKind::log_frequency) {
    throw ShapeError("select_patches: expected a log-frequency map");
  }
  if (y.bins < kPatchSize) throw std::invalid_argument("select_patches: need at least 25 bins");
  if (y.frames < 1) throw std::invalid_argument("select_patches: need at least 1 frame");

  constexpr std::int64_t half = static_cast<std::int64_t>(kPatchSize) / 2;
  std::vector<Patch> patches;
  patches.reserve(y.frames);
  for (std::size_t t = 0; t < y.frames; ++t) {
    Patch patch;
    patch.center_frame = t;
    patch.center_bin = y.argmax_bin(t);
    patch.center_hz = y.axis_values[patch.center_bin];
    const auto cb = static_cast<std::int64_t>(patch.center_bin);
    const auto cf = static_cast<std::int64_t>(t);
    for (std::int64_t r = -half; r <= half; ++r) {
      const std::int64_t bin = cb + r;
      if (bin < 0 || bin >= static_cast<std::int64_t>(y.bins)) continue;
      for (std::int64_t c = -half; c <= half; ++c) {
        const std::int64_t frame = cf + c;
        if (frame < 0 || frame >= static_cast<std::int64_t>(y.frames)) continue;
        patch.values[static_cast<std::size_t>(r + half) * kPatchSize +
                     static_cast<std::size_t>(c + half)] =
            y.at(static_cast<std::size_t>(bin), static_cast<std::size_t>(frame));
      }
    }
    if (truth != nullptr) {
      const double truth_f0 = contour_value_at(*truth, y.frame_time(t));
      if (truth_f0 > 0.0) {
        const double cents = 1200.0 * std::log2(patch.center_hz / truth_f0);
        patch.label =
            std::abs(cents) <= tolerance_cents ? PatchLabel::positive : PatchLabel::negative;
      } else {
        patch.label = PatchLabel::negative;
      }
    }
    patches.push_back(patch);
  }
  return patches;
}

std::vector<Patch> subsample_nonvocal(const std::vector<Patch>& patches, double rate,
                                      std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw std::invalid_argument("subsample_nonvocal: rate must be in (0, 1]");
  }
  for (const auto& p : patches) {
    if (p.label == PatchLabel::unknown) {
      throw std::invalid_argument("subsample_nonvocal: unlabeled patch present");
    }
  }
  Rng rng(seed);
  std::vector<Patch> kept;
  kept.reserve(patches.size());
  for (const auto& p : patches) {
    if (p.label == PatchLabel::positive || rng.uniform() < rate) kept.push_back(p);
  }
  return kept;
}

}  // namespace melex
