#include "redsim/time_series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "redsim/errors.hpp"

namespace redsim {

TimeSeries::TimeSeries(std::vector<std::string> channel_names)
    : names_(std::move(channel_names)), columns_(names_.size()) {}

void TimeSeries::append(double t, std::span<const double> values) {
  if (values.size() != names_.size()) {
    throw std::invalid_argument("TimeSeries::append: expected " + std::to_string(names_.size()) +
                                " values, got " + std::to_string(values.size()));
  }
  if (!time_.empty() && t < time_.back()) {
    throw std::invalid_argument("TimeSeries::append: timestamps must be nondecreasing");
  }
  time_.push_back(t);
  for (std::size_t i = 0; i < values.size(); ++i) columns_[i].push_back(values[i]);
}

void TimeSeries::reserve(std::size_t rows) {
  time_.reserve(rows);
  for (auto& c : columns_) c.reserve(rows);
}

std::optional<std::size_t> TimeSeries::channel_index(std::string_view name) const noexcept {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::span<const double> TimeSeries::channel(std::string_view name) const {
  auto idx = channel_index(name);
  if (!idx) throw std::out_of_range("TimeSeries: no channel named '" + std::string(name) + "'");
  return columns_[*idx];
}

std::span<const double> TimeSeries::channel(std::size_t index) const {
  return columns_.at(index);
}

double TimeSeries::start_time() const {
  if (time_.empty()) throw std::out_of_range("TimeSeries: empty series");
  return time_.front();
}

double TimeSeries::end_time() const {
  if (time_.empty()) throw std::out_of_range("TimeSeries: empty series");
  return time_.back();
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";  // folds -0 as well
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void TimeSeries::write_csv(std::ostream& os) const {
  os << 't';
  for (const auto& n : names_) os << ',' << n;
  os << '\n';
  for (std::size_t r = 0; r < time_.size(); ++r) {
    os << format_number(time_[r]);
    for (const auto& c : columns_) os << ',' << format_number(c[r]);
    os << '\n';
  }
}

void TimeSeries::write_csv(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_csv(os);
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, std::size_t line_no) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw DataError("CSV line " + std::to_string(line_no) + ": bad number '" + text + "'");
  }
  return value;
}

}  // namespace

TimeSeries TimeSeries::read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("CSV: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_line(line);
  if (header.empty() || header.front() != "t") throw DataError("CSV: first column must be 't'");
  TimeSeries ts(std::vector<std::string>(header.begin() + 1, header.end()));
  std::vector<double> row(ts.channel_count());
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError("CSV line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields");
    }
    const double t = parse_number(fields[0], line_no);
    for (std::size_t i = 1; i < fields.size(); ++i) row[i - 1] = parse_number(fields[i], line_no);
    ts.append(t, row);
  }
  return ts;
}

TimeSeries TimeSeries::read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  return read_csv(is);
}

double time_average(const TimeSeries& series, std::string_view channel, double from) {
  auto t = series.time();
  auto v = series.channel(channel);
  double area = 0.0;
  double span = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    double a = t[i - 1];
    double b = t[i];
    if (b <= from) continue;
    double va = v[i - 1];
    if (a < from) {
      va = v[i - 1] + (v[i] - v[i - 1]) * (from - a) / (b - a);
      a = from;
    }
    area += 0.5 * (va + v[i]) * (b - a);
    span += b - a;
  }
  if (span <= 0.0) {
    if (t.empty()) throw std::out_of_range("time_average: empty series");
    return v.back();
  }
  return area / span;
}

double interpolate(const TimeSeries& series, std::size_t channel, double t) {
  auto time = series.time();
  auto v = series.channel(channel);
  if (time.empty()) throw std::out_of_range("interpolate: empty series");
  if (t <= time.front()) return v.front();
  if (t >= time.back()) return v.back();
  auto it = std::upper_bound(time.begin(), time.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - time.begin());
  const std::size_t lo = hi - 1;
  const double dt = time[hi] - time[lo];
  if (dt <= 0.0) return v[hi];
  return v[lo] + (v[hi] - v[lo]) * (t - time[lo]) / dt;
}

}  // namespace redsim
