#include "redsim/oscillation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <ostream>

#include <fftw3.h>
#include <json.hpp>

#include "redsim/errors.hpp"

namespace redsim {

namespace {

constexpr std::size_t kMinSamples = 64;

// Power |X_k|^2 for k = 0..n/2 of a real input.
std::vector<double> power_spectrum(const std::vector<double>& x) {
  static std::mutex planner;  // fftw planning is not thread-safe
  const int n = static_cast<int>(x.size());
  const int m = n / 2 + 1;
  auto* in = static_cast<double*>(fftw_malloc(sizeof(double) * x.size()));
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(m)));
  fftw_plan plan;
  {
    std::lock_guard lock(planner);
    plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
  }
  std::copy(x.begin(), x.end(), in);
  fftw_execute(plan);
  std::vector<double> p(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) p[static_cast<std::size_t>(k)] = out[k][0] * out[k][0] + out[k][1] * out[k][1];
  {
    std::lock_guard lock(planner);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return p;
}

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

double median(std::vector<double> v) {
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

double welch_peak_ratio(const std::vector<double>& x) {
  std::size_t seg = 16;
  while (seg * 2 <= x.size() / 4) seg *= 2;
  const std::size_t hop = seg / 2;
  const auto w = hann(seg);
  std::vector<double> avg(seg / 2 + 1, 0.0);
  std::size_t count = 0;
  for (std::size_t start = 0; start + seg <= x.size(); start += hop, ++count) {
    std::vector<double> chunk(seg);
    for (std::size_t i = 0; i < seg; ++i) chunk[i] = w[i] * x[start + i];
    const auto p = power_spectrum(chunk);
    for (std::size_t k = 0; k < avg.size(); ++k) avg[k] += p[k];
  }
  std::vector<double> non_dc(avg.begin() + 1, avg.end());
  const double med = median(non_dc);
  const double peak = *std::max_element(non_dc.begin(), non_dc.end());
  if (med <= 0.0) return peak > 0.0 ? INFINITY : 0.0;
  return peak / med;
}

}  // namespace

OscillationReport detect_oscillation(const TimeSeries& series, std::string_view channel,
                                     const OscillationOptions& options) {
  const auto idx = series.channel_index(channel);
  if (!idx) throw DataError("oscillation: series has no channel '" + std::string(channel) + "'");
  const auto t = series.time();
  const auto v = series.channel(*idx);

  std::vector<double> ts;
  std::vector<double> xs;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= options.cutoff) {
      ts.push_back(t[i]);
      xs.push_back(v[i]);
    }
  }
  if (xs.size() < kMinSamples) {
    throw DataError("oscillation: need at least 64 samples after the cutoff, got " + std::to_string(xs.size()));
  }

  std::vector<double> gaps;
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (ts[i] > ts[i - 1]) gaps.push_back(ts[i] - ts[i - 1]);
  }
  if (gaps.empty()) throw DataError("oscillation: series has no time extent");
  const double dt = median(gaps);
  const bool uniform = gaps.size() + 1 == ts.size() &&
                       std::all_of(gaps.begin(), gaps.end(), [&](double g) { return std::abs(g - dt) <= 1e-6 * dt; });
  if (!uniform) {
    const auto n = static_cast<std::size_t>(std::floor((ts.back() - ts.front()) / dt + 1e-9)) + 1;
    if (n < kMinSamples) throw DataError("oscillation: fewer than 64 samples after resampling");
    std::vector<double> rs(n);
    for (std::size_t i = 0; i < n; ++i) rs[i] = interpolate(series, *idx, ts.front() + static_cast<double>(i) * dt);
    xs = std::move(rs);
  }

  OscillationReport rep;
  rep.samples = xs.size();
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double peak_dev = 0.0;
  for (double& x : xs) {
    x -= mean;
    peak_dev = std::max(peak_dev, std::abs(x));
  }
  if (peak_dev <= 1e-12 * std::max(1.0, std::abs(mean))) return rep;  // flat signal

  rep.spectral_peak_ratio = welch_peak_ratio(xs);

  const std::size_t n = xs.size();
  const auto w = hann(n);
  double w2 = 0.0;
  std::vector<double> windowed(n);
  for (std::size_t i = 0; i < n; ++i) {
    windowed[i] = w[i] * xs[i];
    w2 += w[i] * w[i];
  }
  const auto p = power_spectrum(windowed);
  std::size_t k = 1;
  for (std::size_t j = 2; j < p.size(); ++j) {
    if (p[j] > p[k]) k = j;
  }
  double delta = 0.0;
  if (k > 1 && k + 1 < p.size() && p[k - 1] > 0.0 && p[k + 1] > 0.0) {
    const double a = std::log(p[k - 1]);
    const double b = std::log(p[k]);
    const double c = std::log(p[k + 1]);
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) delta = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
  }
  const double freq = (static_cast<double>(k) + delta) / (static_cast<double>(n) * dt);
  rep.dominant_period = 1.0 / freq;

  double band = 0.0;
  const std::size_t lo = k > options.band ? k - options.band : 1;
  const std::size_t hi = std::min(p.size() - 1, k + options.band);
  for (std::size_t j = std::max<std::size_t>(lo, 1); j <= hi; ++j) band += p[j];
  const double rms = std::sqrt(2.0 * band / (static_cast<double>(n) * w2));
  rep.amplitude = std::numbers::sqrt2 * rms;
  rep.detected = rep.spectral_peak_ratio >= options.threshold && rep.dominant_period > 0.0;
  return rep;
}

void write_oscillation_json(std::ostream& os, const OscillationReport& r) {
  nlohmann::ordered_json j;
  j["detected"] = r.detected;
  j["dominant_period"] = r.dominant_period;
  j["amplitude"] = r.amplitude;
  j["spectral_peak_ratio"] = std::isfinite(r.spectral_peak_ratio) ? nlohmann::ordered_json(r.spectral_peak_ratio)
                                                                  : nlohmann::ordered_json(nullptr);
  j["samples"] = r.samples;
  os << j.dump(2) << '\n';
}

}  // namespace redsim
