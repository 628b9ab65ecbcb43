#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "redsim/red.hpp"
#include "redsim/rng.hpp"
#include "redsim/time_series.hpp"

namespace redsim::fluid {

// How the queue-channel noise amplitude is built.
//  SumRates:          sigma_Q = sqrt(W/T + C), arrival plus service intensity.
//  AsWrittenClamped:  sigma_Q = sqrt(max(0, W/T - C)), the signed-rate form.
enum class DiffusionMode { SumRates, AsWrittenClamped };

// Window/queue jump-diffusion for one aggregate Reno source behind a RED
// queue. `n_flows` identical sources multiply the arrival rate into the queue;
// W is then the per-flow window.
struct FluidParams {
  double C = 100.0;
  double w_q = 0.00995016625083189;
  RedParams red{};
  double T_p = 0.1;
  DiffusionMode diffusion_mode = DiffusionMode::SumRates;
  double w_floor = 1.0;
  double q_lower = 0.0;
  double q_upper = 50.0;
  int n_flows = 1;

  bool diffusion_enabled = true;
  bool jumps_enabled = true;
  // Adds the mean jump effect -(W/2)*lambda to the window drift. Used with
  // jumps disabled to obtain the deterministic moment dynamics.
  bool mean_jump_drift = false;
  // Overrides lambda = p(Q_hat) W / T with a constant rate.
  std::optional<double> constant_lambda;

  std::vector<std::string> violations() const;
  void validate() const;
};

struct FluidState {
  double t = 0.0;
  double W = 1.0;
  double Q = 0.0;
  double Q_hat = 0.0;

  friend bool operator==(const FluidState&, const FluidState&) = default;
};

struct NoiseDraws {
  double dV1 = 0.0;  // N(0, dt)
  double dV2 = 0.0;  // N(0, dt)
  bool jump = false;
};

// Round-trip time with queueing delay: T(Q) = T_p + Q/C.
double rtt(double Q, const FluidParams& params);

// Loss-event intensity lambda = p(Q_hat) W / T(Q), or the configured constant.
double loss_intensity(const FluidState& state, const FluidParams& params);

// (dW/dt, dQ/dt, dQ_hat/dt) without noise and without the discrete jump.
std::array<double, 3> drift(const FluidState& state, const FluidParams& params);

// (sigma_W, sigma_Q) for the configured diffusion mode.
std::array<double, 2> diffusion(const FluidState& state, const FluidParams& params);

// Draws Wiener increments and the jump indicator for one step of length dt.
// Consumes two normals and one uniform in that order.
NoiseDraws draw_noise(RandomStream& rng, double dt, double lambda);

// One Euler-Maruyama step with the jump applied after the drift/diffusion
// update of W. Throws IntegrationError on a non-finite result.
FluidState em_step(const FluidState& state, double dt, const NoiseDraws& draws,
                   const FluidParams& params);

// Single path sampled every `sample_interval` (rounded to a whole number of
// steps). Channels: W, Q, Q_hat.
TimeSeries simulate_path(const FluidParams& params, const FluidState& init, double t_end,
                         double dt, double sample_interval, RandomStream& rng);

struct Histogram {
  std::vector<double> edges;    // bins + 1 entries
  std::vector<double> density;  // normalized so sum(density * width) = 1

  double integral() const;
};

// Normalized histogram over [min, max] of the data (widened when degenerate).
Histogram empirical_density(std::span<const double> values, std::size_t bins);

struct EnsembleOptions {
  double t_end = 60.0;
  double dt = 1e-3;
  std::size_t n_paths = 100;
  std::uint64_t seed = 1;
  double sample_interval = 0.1;
  unsigned threads = 1;
  std::size_t bins = 50;
  // Samples with t >= stationary_from are pooled into the stationary densities.
  double stationary_from = 0.0;
  bool keep_paths = false;
};

struct EnsembleResult {
  std::vector<TimeSeries> paths;  // filled when keep_paths is set
  // Channels: W_mean, W_var, Q_mean, Q_var, Q_hat_mean, Q_hat_var.
  TimeSeries stats;
  Histogram w_density_final;
  Histogram q_density_final;
  Histogram w_density_stationary;
  Histogram q_density_stationary;
};

// Independent paths on substreams (seed, path index). Results are merged by
// path index, so any thread count yields identical output.
EnsembleResult simulate_paths(const FluidParams& params, const FluidState& init,
                              const EnsembleOptions& options);

void write_density_csv(const std::string& path, const Histogram& histogram);

}  // namespace redsim::fluid
