#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "redsim/time_series.hpp"

namespace redsim {

struct ChannelPair {
  std::string a;
  std::string b;
};

struct MetricRow {
  std::string channel_a;
  std::string channel_b;
  double value_a = 0.0;  // mean over the compared window
  double value_b = 0.0;
  double abs_diff = 0.0;
  double rel_diff = 0.0;  // (a - b) / |b|; 0 when both are 0
  double mean_abs_diff = 0.0;  // pointwise, on the common grid
};

struct ComparisonReport {
  double t_from = 0.0;
  double t_to = 0.0;
  double grid_step = 0.0;
  std::size_t grid_points = 0;
  std::vector<MetricRow> rows;
};

struct CompareOptions {
  // Absolute transient cutoff; defaults to 20% into the overlap.
  std::optional<double> cutoff;
  // Grid step; defaults to the coarser of the two median sample spacings.
  std::optional<double> step;
};

// Resamples both series to a common uniform grid on their overlap (linear
// interpolation), drops t < cutoff and tabulates the channel pairs.
ComparisonReport compare(const TimeSeries& a, const TimeSeries& b, const std::vector<ChannelPair>& channels,
                         const CompareOptions& options = {});

void write_report_csv(std::ostream& os, const ComparisonReport& report);
void write_report_json(std::ostream& os, const ComparisonReport& report);

}  // namespace redsim
