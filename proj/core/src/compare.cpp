#include "redsim/compare.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "redsim/errors.hpp"

namespace redsim {

namespace {

double median_spacing(const TimeSeries& s) {
  const auto t = s.time();
  std::vector<double> d;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] > t[i - 1]) d.push_back(t[i] - t[i - 1]);
  }
  if (d.empty()) throw DataError("compare: series has no time extent");
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

std::size_t require(const TimeSeries& s, const std::string& name, const char* which) {
  auto idx = s.channel_index(name);
  if (!idx) throw DataError(std::string("compare: series ") + which + " has no channel '" + name + "'");
  return *idx;
}

}  // namespace

ComparisonReport compare(const TimeSeries& a, const TimeSeries& b, const std::vector<ChannelPair>& channels,
                         const CompareOptions& options) {
  if (channels.empty()) throw DataError("compare: no channels selected");
  if (a.size() < 2 || b.size() < 2) throw DataError("compare: each series needs at least two samples");
  std::vector<std::pair<std::size_t, std::size_t>> idx;
  for (const auto& c : channels) idx.emplace_back(require(a, c.a, "A"), require(b, c.b, "B"));

  const double t0 = std::max(a.start_time(), b.start_time());
  const double t1 = std::min(a.end_time(), b.end_time());
  if (!(t0 < t1)) throw DataError("compare: time ranges do not overlap");
  const double cutoff = options.cutoff.value_or(t0 + 0.2 * (t1 - t0));
  const double from = std::max(t0, cutoff);
  if (!(from < t1)) throw DataError("compare: cutoff leaves no overlapping samples");
  const double step = options.step.value_or(std::max(median_spacing(a), median_spacing(b)));
  if (!(step > 0.0)) throw DataError("compare: grid step must be > 0");

  ComparisonReport rep;
  rep.t_from = from;
  rep.t_to = t1;
  rep.grid_step = step;
  rep.grid_points = static_cast<std::size_t>(std::floor((t1 - from) / step + 1e-9)) + 1;

  for (std::size_t c = 0; c < channels.size(); ++c) {
    MetricRow row;
    row.channel_a = channels[c].a;
    row.channel_b = channels[c].b;
    double sa = 0.0;
    double sb = 0.0;
    double sd = 0.0;
    for (std::size_t i = 0; i < rep.grid_points; ++i) {
      const double t = from + static_cast<double>(i) * step;
      const double va = interpolate(a, idx[c].first, t);
      const double vb = interpolate(b, idx[c].second, t);
      sa += va;
      sb += vb;
      sd += std::abs(va - vb);
    }
    const auto n = static_cast<double>(rep.grid_points);
    row.value_a = sa / n;
    row.value_b = sb / n;
    row.abs_diff = std::abs(row.value_a - row.value_b);
    if (row.value_b != 0.0) row.rel_diff = (row.value_a - row.value_b) / std::abs(row.value_b);
    else row.rel_diff = row.value_a == 0.0 ? 0.0 : INFINITY;
    row.mean_abs_diff = sd / n;
    rep.rows.push_back(row);
  }
  return rep;
}

void write_report_csv(std::ostream& os, const ComparisonReport& report) {
  os << "channel_a,channel_b,value_a,value_b,abs_diff,rel_diff,mean_abs_diff\n";
  for (const auto& r : report.rows) {
    os << r.channel_a << ',' << r.channel_b << ',' << format_number(r.value_a) << ',' << format_number(r.value_b)
       << ',' << format_number(r.abs_diff) << ',' << format_number(r.rel_diff) << ','
       << format_number(r.mean_abs_diff) << '\n';
  }
}

void write_report_json(std::ostream& os, const ComparisonReport& report) {
  nlohmann::ordered_json j;
  j["t_from"] = report.t_from;
  j["t_to"] = report.t_to;
  j["grid_step"] = report.grid_step;
  j["grid_points"] = report.grid_points;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json e;
    e["channel_a"] = r.channel_a;
    e["channel_b"] = r.channel_b;
    e["value_a"] = r.value_a;
    e["value_b"] = r.value_b;
    e["abs_diff"] = r.abs_diff;
    e["rel_diff"] = std::isfinite(r.rel_diff) ? nlohmann::ordered_json(r.rel_diff) : nlohmann::ordered_json(nullptr);
    e["mean_abs_diff"] = r.mean_abs_diff;
    rows.push_back(e);
  }
  j["rows"] = rows;
  os << j.dump(2) << '\n';
}

}  // namespace redsim
