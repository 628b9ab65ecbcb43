#include "redsim/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "redsim/errors.hpp"

namespace redsim::fluid {

std::vector<std::string> FluidParams::violations() const {
  std::vector<std::string> out = red.violations();
  if (!(C > 0.0) || !std::isfinite(C)) out.emplace_back("fluid.C must be > 0");
  if (!(T_p >= 0.0) || !std::isfinite(T_p)) out.emplace_back("fluid.T_p must be >= 0");
  if (!(w_q > 0.0 && w_q < 1.0)) out.emplace_back("fluid.w_q must lie in (0, 1)");
  if (!(w_floor > 0.0)) out.emplace_back("fluid.w_floor must be > 0");
  if (!(q_lower >= 0.0 && q_lower < q_upper)) out.emplace_back("fluid.q_bounds must satisfy 0 <= lower < upper");
  if (n_flows < 1) out.emplace_back("fluid.n_flows must be >= 1");
  if (T_p == 0.0 && q_lower == 0.0) out.emplace_back("fluid.T_p must be > 0 when the queue can empty");
  if (constant_lambda && !(*constant_lambda >= 0.0)) out.emplace_back("fluid.constant_lambda must be >= 0");
  return out;
}

void FluidParams::validate() const {
  auto v = violations();
  if (!v.empty()) throw ConfigError(std::move(v));
}

double rtt(double Q, const FluidParams& params) { return params.T_p + Q / params.C; }

double loss_intensity(const FluidState& state, const FluidParams& params) {
  if (params.constant_lambda) return *params.constant_lambda;
  const double p = drop_probability(state.Q_hat, params.red);
  if (p == 0.0) return 0.0;
  return p * state.W / rtt(state.Q, params);
}

std::array<double, 3> drift(const FluidState& state, const FluidParams& params) {
  const double T = rtt(state.Q, params);
  double dW = 1.0 / T;
  if (params.mean_jump_drift) dW -= 0.5 * state.W * loss_intensity(state, params);
  const double dQ = params.n_flows * state.W / T - params.C;
  const double dQ_hat = params.w_q * params.C * (state.Q - state.Q_hat);
  return {dW, dQ, dQ_hat};
}

std::array<double, 2> diffusion(const FluidState& state, const FluidParams& params) {
  const double T = rtt(state.Q, params);
  const double lambda = loss_intensity(state, params);
  const double sigma_w = std::sqrt(1.0 / T + 0.5 * state.W * lambda);
  const double arrivals = params.n_flows * state.W / T;
  double sigma_q = 0.0;
  switch (params.diffusion_mode) {
    case DiffusionMode::SumRates: sigma_q = std::sqrt(arrivals + params.C); break;
    case DiffusionMode::AsWrittenClamped: sigma_q = std::sqrt(std::max(0.0, arrivals - params.C)); break;
  }
  return {sigma_w, sigma_q};
}

NoiseDraws draw_noise(RandomStream& rng, double dt, double lambda) {
  NoiseDraws d;
  const double scale = std::sqrt(dt);
  d.dV1 = rng.normal() * scale;
  d.dV2 = rng.normal() * scale;
  d.jump = rng.uniform() < std::min(1.0, lambda * dt);
  return d;
}

FluidState em_step(const FluidState& state, double dt, const NoiseDraws& draws,
                   const FluidParams& params) {
  const auto [dW, dQ, dQ_hat] = drift(state, params);
  std::array<double, 2> sigma{0.0, 0.0};
  if (params.diffusion_enabled) sigma = diffusion(state, params);

  FluidState next;
  next.t = state.t + dt;
  double W = state.W + dW * dt + sigma[0] * draws.dV1;
  if (params.jumps_enabled && draws.jump) W -= 0.5 * state.W;
  double Q = state.Q + dQ * dt + sigma[1] * draws.dV2;
  const double Q_hat = state.Q_hat + dQ_hat * dt;

  if (!std::isfinite(W) || !std::isfinite(Q) || !std::isfinite(Q_hat)) {
    throw IntegrationError("em_step: non-finite state at t=" + std::to_string(state.t));
  }
  next.W = std::max(W, params.w_floor);
  next.Q = std::clamp(Q, params.q_lower, params.q_upper);
  next.Q_hat = std::max(Q_hat, 0.0);
  return next;
}

namespace {

std::size_t stride_for(double sample_interval, double dt) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(sample_interval / dt)));
}

// Advances one step, halving dt on integration failure.
FluidState robust_step(const FluidState& s, double dt, const FluidParams& params, RandomStream& rng,
                       int depth = 0) {
  const double lambda = params.jumps_enabled ? loss_intensity(s, params) : 0.0;
  const NoiseDraws draws = draw_noise(rng, dt, lambda);
  try {
    return em_step(s, dt, draws, params);
  } catch (const IntegrationError&) {
    if (depth >= 12) throw;
    const FluidState mid = robust_step(s, dt / 2, params, rng, depth + 1);
    return robust_step(mid, dt / 2, params, rng, depth + 1);
  }
}

struct PathSamples {
  std::vector<double> t, W, Q, Q_hat;
};

PathSamples run_path(const FluidParams& params, const FluidState& init, double t_end, double dt,
                     double sample_interval, RandomStream& rng) {
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  const std::size_t stride = stride_for(sample_interval, dt);
  PathSamples out;
  const std::size_t n_samples = steps / stride + 1;
  out.t.reserve(n_samples);
  out.W.reserve(n_samples);
  out.Q.reserve(n_samples);
  out.Q_hat.reserve(n_samples);
  FluidState s = init;
  auto record = [&](const FluidState& x) {
    out.t.push_back(x.t);
    out.W.push_back(x.W);
    out.Q.push_back(x.Q);
    out.Q_hat.push_back(x.Q_hat);
  };
  record(s);
  for (std::size_t k = 1; k <= steps; ++k) {
    s = robust_step(s, dt, params, rng);
    // Keep time on the grid rather than accumulating rounding.
    s.t = init.t + static_cast<double>(k) * dt;
    if (k % stride == 0) record(s);
  }
  return out;
}

TimeSeries to_series(const PathSamples& p) {
  TimeSeries ts({"W", "Q", "Q_hat"});
  ts.reserve(p.t.size());
  for (std::size_t i = 0; i < p.t.size(); ++i) ts.append(p.t[i], {p.W[i], p.Q[i], p.Q_hat[i]});
  return ts;
}

void check_run_args(double t_end, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be > 0");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end must be > 0");
}

}  // namespace

TimeSeries simulate_path(const FluidParams& params, const FluidState& init, double t_end,
                         double dt, double sample_interval, RandomStream& rng) {
  params.validate();
  check_run_args(t_end, dt);
  return to_series(run_path(params, init, t_end, dt, sample_interval, rng));
}

double Histogram::integral() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) sum += density[i] * (edges[i + 1] - edges[i]);
  return sum;
}

Histogram empirical_density(std::span<const double> values, std::size_t bins) {
  if (values.empty()) throw DomainError("empirical_density: no values");
  if (bins == 0) throw DomainError("empirical_density: bins must be >= 1");
  auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  double lo = *mn;
  double hi = *mx;
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  h.edges.back() = hi;
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    auto idx = static_cast<std::size_t>((v - lo) / width);
    counts[std::min(idx, bins - 1)] += 1;
  }
  h.density.resize(bins);
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < bins; ++i) {
    h.density[i] = static_cast<double>(counts[i]) / (n * (h.edges[i + 1] - h.edges[i]));
  }
  return h;
}

EnsembleResult simulate_paths(const FluidParams& params, const FluidState& init,
                              const EnsembleOptions& options) {
  params.validate();
  check_run_args(options.t_end, options.dt);
  if (options.n_paths < 1) throw ConfigError("n_paths must be >= 1");

  std::vector<PathSamples> paths(options.n_paths);
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RandomStream rng = RandomStream::substream(options.seed, i);
      paths[i] = run_path(params, init, options.t_end, options.dt, options.sample_interval, rng);
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, options.n_paths));
  if (threads == 1) {
    worker(0, options.n_paths);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (options.n_paths + threads - 1) / threads;
    for (unsigned k = 0; k < threads; ++k) {
      const std::size_t b = k * chunk;
      const std::size_t e = std::min(options.n_paths, b + chunk);
      if (b < e) pool.emplace_back(worker, b, e);
    }
  }

  EnsembleResult result;
  result.stats = TimeSeries({"W_mean", "W_var", "Q_mean", "Q_var", "Q_hat_mean", "Q_hat_var"});
  const std::size_t n_samples = paths.front().t.size();
  const double n = static_cast<double>(options.n_paths);
  std::vector<double> pooled_w;
  std::vector<double> pooled_q;
  for (std::size_t j = 0; j < n_samples; ++j) {
    double mean[3] = {0, 0, 0};
    for (const auto& p : paths) {
      mean[0] += p.W[j];
      mean[1] += p.Q[j];
      mean[2] += p.Q_hat[j];
    }
    for (double& m : mean) m /= n;
    double var[3] = {0, 0, 0};
    if (options.n_paths > 1) {
      for (const auto& p : paths) {
        var[0] += (p.W[j] - mean[0]) * (p.W[j] - mean[0]);
        var[1] += (p.Q[j] - mean[1]) * (p.Q[j] - mean[1]);
        var[2] += (p.Q_hat[j] - mean[2]) * (p.Q_hat[j] - mean[2]);
      }
      for (double& v : var) v /= (n - 1.0);
    }
    const double t = paths.front().t[j];
    result.stats.append(t, {mean[0], var[0], mean[1], var[1], mean[2], var[2]});
    if (t >= options.stationary_from) {
      for (const auto& p : paths) {
        pooled_w.push_back(p.W[j]);
        pooled_q.push_back(p.Q[j]);
      }
    }
  }

  std::vector<double> final_w;
  std::vector<double> final_q;
  for (const auto& p : paths) {
    final_w.push_back(p.W.back());
    final_q.push_back(p.Q.back());
  }
  result.w_density_final = empirical_density(final_w, options.bins);
  result.q_density_final = empirical_density(final_q, options.bins);
  if (pooled_w.empty()) {
    pooled_w = final_w;
    pooled_q = final_q;
  }
  result.w_density_stationary = empirical_density(pooled_w, options.bins);
  result.q_density_stationary = empirical_density(pooled_q, options.bins);

  if (options.keep_paths) {
    result.paths.reserve(paths.size());
    for (const auto& p : paths) result.paths.push_back(to_series(p));
  }
  return result;
}

void write_density_csv(const std::string& path, const Histogram& h) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << "bin_left,bin_right,density\n";
  for (std::size_t i = 0; i < h.density.size(); ++i) {
    os << format_number(h.edges[i]) << ',' << format_number(h.edges[i + 1]) << ','
       << format_number(h.density[i]) << '\n';
  }
}

}  // namespace redsim::fluid
