#pragma once

#include <cstddef>

#include "melex/audio_io.hpp"

namespace melex {

struct MetricsReport {
  double rpa = 0.0;
  double rca = 0.0;
  std::size_t voiced_frames = 0;  // truth-voiced frames (the denominator)
  std::size_t total_frames = 0;
  double tolerance_cents = 50.0;
};

/// 1200 * log2(f_est / f_ref); both must be > 0.
double cents_difference(double f_est, double f_ref);

/// Raw pitch / raw chroma accuracy over truth-voiced frames. Estimate frames
/// are matched by nearest center time (truth hop authoritative); chroma
/// forgives octave shifts within +/-5 octaves.
MetricsReport evaluate(const PitchContour& est, const PitchContour& truth,
                       double tolerance_cents = 50.0);

}  // namespace melex
