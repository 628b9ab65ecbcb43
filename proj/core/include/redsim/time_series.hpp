#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace redsim {

// Column-oriented trajectory: a time axis plus named channels of equal length.
// Timestamps are nondecreasing; they may be uniform (fixed-step integrators)
// or event-driven (hybrid transitions add rows at event times).
class TimeSeries {
 public:
  TimeSeries() = default;
  explicit TimeSeries(std::vector<std::string> channel_names);

  std::size_t size() const noexcept { return time_.size(); }
  bool empty() const noexcept { return time_.empty(); }
  std::size_t channel_count() const noexcept { return names_.size(); }
  const std::vector<std::string>& channel_names() const noexcept { return names_; }

  // Appends one row; `values` must have one entry per channel.
  void append(double t, std::span<const double> values);
  void append(double t, std::initializer_list<double> values) {
    append(t, std::span<const double>(values.begin(), values.size()));
  }
  void reserve(std::size_t rows);

  std::span<const double> time() const noexcept { return time_; }
  std::span<const double> channel(std::string_view name) const;
  std::span<const double> channel(std::size_t index) const;
  std::optional<std::size_t> channel_index(std::string_view name) const noexcept;
  bool has_channel(std::string_view name) const noexcept { return channel_index(name).has_value(); }

  double start_time() const;
  double end_time() const;

  // CSV with header "t,<channels...>". Numbers use the shortest decimal
  // form that round-trips, so output is byte-stable for identical data.
  void write_csv(std::ostream& os) const;
  void write_csv(const std::string& path) const;
  static TimeSeries read_csv(std::istream& is);
  static TimeSeries read_csv(const std::string& path);

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<double> time_;
  std::vector<std::vector<double>> columns_;
};

// Shortest round-trip decimal representation of a double.
std::string format_number(double value);

// Time-weighted average of a channel over [from, end] using the trapezoid
// rule on the stored samples.
double time_average(const TimeSeries& series, std::string_view channel, double from);

// Linear interpolation of `channel` at time `t` (clamped to the series range).
double interpolate(const TimeSeries& series, std::size_t channel, double t);

}  // namespace redsim
