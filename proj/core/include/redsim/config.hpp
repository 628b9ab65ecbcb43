#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "redsim/fluid.hpp"
#include "redsim/scenario.hpp"
#include "redsim/surrogate.hpp"

namespace redsim {

enum class ModelKind { Des, Fluid, Moments, Hybrid };
std::string_view to_string(ModelKind kind) noexcept;
std::optional<ModelKind> model_from_string(std::string_view text) noexcept;

enum class OutputFormat { Csv, Json };
std::string_view to_string(OutputFormat format) noexcept;

struct FluidBlock {
  std::size_t n_paths = 100;
  unsigned threads = 1;
  std::size_t bins = 50;
  fluid::DiffusionMode diffusion_mode = fluid::DiffusionMode::SumRates;
  bool diffusion = true;
  bool jumps = true;
  bool mean_jump_drift = false;

  friend bool operator==(const FluidBlock&, const FluidBlock&) = default;
};

struct SurrogateBlock {
  std::vector<surrogate::Dimension> box;
  std::size_t n_points = 40;
  std::string evaluator = "moments";  // moments | des | fluid
  std::size_t replications = 1;
  surrogate::Kind kind = surrogate::Kind::Polynomial2;
  std::size_t k = 5;
  std::size_t refine = 0;

  friend bool operator==(const SurrogateBlock&, const SurrogateBlock&) = default;
};

struct ExperimentConfig {
  ModelKind model = ModelKind::Des;
  std::uint64_t seed = 0;
  Scenario scenario{};
  double duration = 60.0;
  double dt = 1e-3;
  double sample_interval = 0.1;
  double cutoff_fraction = 0.2;  // transient cutoff as a fraction of duration
  fluid::FluidState initial{};
  FluidBlock fluid{};
  double w_to = 4.0;
  bool event_log = false;
  std::optional<SurrogateBlock> surrogate;
  std::string out_dir = "out";
  OutputFormat format = OutputFormat::Csv;

  std::vector<std::string> violations() const;
  surrogate::ParameterBox box() const;  // throws ConfigError without a surrogate block

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Parses a YAML document. Every problem found (syntax, missing or unknown
// keys, bad types, invariant violations) is collected into one ConfigError;
// messages carry "line N:" where a location is known.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

// Canonical YAML form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

}  // namespace redsim
