#include "melex/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "melex/errors.hpp"

namespace melex {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

TimeFrequencyMap TimeFrequencyMap::zeros(std::size_t bins, std::size_t frames) {
  TimeFrequencyMap m;
  m.bins = bins;
  m.frames = frames;
  m.values.assign(bins * frames, 0.0);
  return m;
}

std::size_t TimeFrequencyMap::argmax_bin(std::size_t frame) const {
  std::size_t best = 0;
  double best_v = at(0, frame);
  for (std::size_t b = 1; b < bins; ++b) {
    double v = at(b, frame);
    if (v > best_v) {
      best_v = v;
      best = b;
    }
  }
  return best;
}

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw ShapeError("fft size must be a power of two");

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }

  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv_n;
  }
}

std::vector<double> hann_window(std::size_t n) {
  if (n < 2) throw std::invalid_argument("hann_window: length must be >= 2");
  std::vector<double> w(n);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom));
  }
  w[0] = 0.0;
  w[n - 1] = 0.0;
  return w;
}

TimeFrequencyMap stft_magnitude(const AudioClip& clip, const StftConfig& cfg,
                                SpectrogramScale scale) {
  const std::size_t n = cfg.window_size;
  if (!is_power_of_two(n)) throw std::invalid_argument("stft: window_size must be a power of two");
  if (cfg.hop == 0 || cfg.hop > n) throw std::invalid_argument("stft: need 0 < hop <= window_size");
  if (clip.sample_rate != cfg.sample_rate) {
    throw std::invalid_argument("stft: clip sample rate does not match config");
  }
  if (clip.samples.size() < n) throw std::invalid_argument("stft: clip shorter than one window");

  const std::size_t frames = 1 + (clip.samples.size() - n) / cfg.hop;
  const std::size_t bins = n / 2 + 1;
  const std::vector<double> window = hann_window(n);
  const double fs = static_cast<double>(cfg.sample_rate);

  TimeFrequencyMap out = TimeFrequencyMap::zeros(bins, frames);
  out.axis_kind = AxisKind::linear_frequency;
  out.axis_values.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    out.axis_values[k] = static_cast<double>(k) * fs / static_cast<double>(n);
  }
  out.hop_seconds = static_cast<double>(cfg.hop) / fs;
  out.start_seconds = static_cast<double>(n) / (2.0 * fs);

  std::vector<std::complex<double>> buf(n);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* frame = clip.samples.data() + t * cfg.hop;
    for (std::size_t i = 0; i < n; ++i) buf[i] = frame[i] * window[i];
    fft_inplace(buf, false);
    for (std::size_t k = 0; k < bins; ++k) {
      double mag = std::abs(buf[k]);
      out.at(k, t) = (scale == SpectrogramScale::log_magnitude) ? std::log1p(mag) : mag;
    }
  }
  return out;
}

PitchContour autocorr_pitch(const AudioClip& clip, const StftConfig& cfg, double f_min,
                            double f_max, double voicing_threshold) {
  const double fs = static_cast<double>(cfg.sample_rate);
  if (!(f_min > 0.0 && f_min < f_max && f_max <= fs / 2.0)) {
    throw std::invalid_argument("autocorr_pitch: need 0 < f_min < f_max <= fs/2");
  }
  if (!(voicing_threshold > 0.0 && voicing_threshold < 1.0)) {
    throw std::invalid_argument("autocorr_pitch: voicing threshold must be in (0,1)");
  }
  const std::size_t n = cfg.window_size;
  if (clip.sample_rate != cfg.sample_rate) {
    throw std::invalid_argument("autocorr_pitch: clip sample rate does not match config");
  }
  if (clip.samples.size() < n) {
    throw std::invalid_argument("autocorr_pitch: clip shorter than one window");
  }

  // Integer closure of [fs/f_max, fs/f_min]; the fractional true peak must
  // have both flanking integer lags available.
  const auto lag_lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fs / f_max)));
  const std::size_t lag_hi =
      std::min(n - 1, static_cast<std::size_t>(std::ceil(fs / f_min)));
  if (lag_lo > lag_hi) {
    throw std::invalid_argument("autocorr_pitch: empty lag search range");
  }

  const std::size_t frames = 1 + (clip.samples.size() - n) / cfg.hop;
  const std::vector<double> window = hann_window(n);
  const std::size_t padded = 2 * n;  // linear (not circular) lag products

  PitchContour contour;
  contour.f0.assign(frames, 0.0);
  contour.hop_seconds = static_cast<double>(cfg.hop) / fs;
  contour.start_seconds = static_cast<double>(n) / (2.0 * fs);

  // Among near-maximal peaks the shortest lag is the period; a longer
  // multiple can align better with the integer grid and out-score the true
  // peak, so raw in-range argmax octave-errs on high fundamentals.
  constexpr double kPeakHeightTolerance = 0.85;

  std::vector<std::complex<double>> buf(padded);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* frame = clip.samples.data() + t * cfg.hop;
    for (std::size_t i = 0; i < n; ++i) buf[i] = frame[i] * window[i];
    std::fill(buf.begin() + static_cast<std::ptrdiff_t>(n), buf.end(),
              std::complex<double>(0.0, 0.0));
    fft_inplace(buf, false);
    for (auto& c : buf) c = std::norm(c);  // power spectrum
    fft_inplace(buf, true);

    const double r0 = buf[0].real();
    if (r0 <= 0.0) continue;  // silent frame stays unvoiced

    // Parabolic vertex through (tau-1, tau, tau+1); neighbors just outside
    // the search range are fair game.
    auto refine = [&](std::size_t tau) {
      const double ym = buf[tau - 1].real();
      const double y0 = buf[tau].real();
      const double yp = buf[tau + 1].real();
      const double denom = ym - 2.0 * y0 + yp;
      double delta = 0.0;
      if (std::abs(denom) > 1e-300) delta = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
      const double height = y0 - 0.25 * (ym - yp) * delta;
      return std::pair<double, double>(static_cast<double>(tau) + delta, height);
    };

    double peak_height = 0.0;
    std::vector<std::pair<double, double>> peaks;  // (lag, interpolated height)
    for (std::size_t tau = lag_lo; tau <= lag_hi; ++tau) {
      const double v = buf[tau].real();
      if (v < buf[tau - 1].real() || v < buf[tau + 1].real()) continue;
      const auto [lag, height] = refine(tau);
      peaks.emplace_back(lag, height);
      peak_height = std::max(peak_height, height);
    }
    double tau_hat = 0.0, height = 0.0;
    if (peaks.empty()) {
      std::size_t best = lag_lo;
      for (std::size_t tau = lag_lo + 1; tau <= lag_hi; ++tau) {
        if (buf[tau].real() > buf[best].real()) best = tau;
      }
      std::tie(tau_hat, height) = refine(best);
    } else {
      for (const auto& [lag, h] : peaks) {
        if (h >= kPeakHeightTolerance * peak_height) {
          tau_hat = lag;
          height = h;
          break;  // peaks are in ascending lag order; first hit is shortest
        }
      }
    }
    if (tau_hat <= 0.0 || height / r0 < voicing_threshold) continue;
    contour.f0[t] = fs / tau_hat;
  }
  return contour;
}

}  // namespace melex
