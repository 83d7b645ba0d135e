#include "melex/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace melex {

namespace {

constexpr int kMaxOctaveShift = 5;

}  // namespace

double cents_difference(double f_est, double f_ref) {
  if (!(f_est > 0.0) || !(f_ref > 0.0)) {
    throw std::invalid_argument("cents_difference: frequencies must be > 0");
  }
  return 1200.0 * std::log2(f_est / f_ref);
}

MetricsReport evaluate(const PitchContour& est, const PitchContour& truth,
                       double tolerance_cents) {
  if (truth.frames() == 0) throw std::invalid_argument("evaluate: empty truth contour");

  MetricsReport report;
  report.tolerance_cents = tolerance_cents;
  report.total_frames = truth.frames();

  std::size_t rpa_hits = 0, rca_hits = 0;
  for (std::size_t i = 0; i < truth.frames(); ++i) {
    const double truth_f0 = truth.f0[i];
    if (!(truth_f0 > 0.0)) continue;
    ++report.voiced_frames;
    const double est_f0 = contour_value_at(est, truth.frame_time(i));
    if (!(est_f0 > 0.0)) continue;
    const double cents = cents_difference(est_f0, truth_f0);
    if (std::abs(cents) <= tolerance_cents) ++rpa_hits;
    const auto k = std::clamp<long>(std::lround(-cents / 1200.0), -kMaxOctaveShift,
                                    kMaxOctaveShift);
    if (std::abs(cents + 1200.0 * static_cast<double>(k)) <= tolerance_cents) ++rca_hits;
  }

  if (report.voiced_frames == 0) {
    throw std::invalid_argument("evaluate: truth has no voiced frames; ratios undefined");
  }
  report.rpa = static_cast<double>(rpa_hits) / static_cast<double>(report.voiced_frames);
  report.rca = static_cast<double>(rca_hits) / static_cast<double>(report.voiced_frames);
  return report;
}

}  // namespace melex
