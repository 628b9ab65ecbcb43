#pragma once

#include <iosfwd>
#include <string_view>

#include "redsim/time_series.hpp"

namespace redsim {

struct OscillationReport {
  bool detected = false;
  double dominant_period = 0.0;  // s
  double amplitude = 0.0;
  double spectral_peak_ratio = 0.0;
  std::size_t samples = 0;
};

struct OscillationOptions {
  double cutoff = 0.0;     // samples with t < cutoff are ignored
  double threshold = 5.0;  // peak / median power needed for detection
  std::size_t band = 4;    // half-width in bins of the amplitude band
};

// Periodogram-based detector. The peak ratio comes from a Welch average
// (Hann, 50% overlap), period and amplitude from the full-length Hann
// periodogram with parabolic peak refinement. Non-uniform input is first
// resampled at its median spacing.
OscillationReport detect_oscillation(const TimeSeries& series, std::string_view channel,
                                     const OscillationOptions& options = {});

void write_oscillation_json(std::ostream& os, const OscillationReport& report);

}  // namespace redsim
