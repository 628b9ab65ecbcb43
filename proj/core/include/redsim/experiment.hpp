#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "redsim/config.hpp"
#include "redsim/surrogate.hpp"
#include "redsim/time_series.hpp"

namespace redsim {

std::string_view version() noexcept;

// A model failure, prefixed with the model and seed that produced it.
class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Artifacts {
  std::filesystem::path dir;
  std::vector<std::string> files;  // relative to dir, manifest last
};

// Runs the configured model and writes into config.out_dir:
//   series.csv|json, summary.json, manifest.json
//   + equilibrium.json (moments), density_W.csv / density_Q.csv (fluid),
//     transitions.csv (hybrid), events.csv (des with event_log).
// The output directory is created and probed before any computation.
Artifacts run_experiment(const ExperimentConfig& config);

// Creates `dir` and checks it is writable; throws IoError otherwise.
void prepare_output_dir(const std::filesystem::path& dir);

void write_series(const TimeSeries& series, const std::filesystem::path& path, OutputFormat format);

// config echo, seed, code version, artifact list and a creation timestamp
// (the only field that differs between identical runs).
void write_manifest(const std::filesystem::path& path, const ExperimentConfig& config,
                    std::string_view command, const std::vector<std::string>& artifacts);

// Evaluator named by the config's surrogate block, with run length taken
// from the shared duration/dt/fluid settings.
surrogate::Evaluator make_evaluator(const ExperimentConfig& config);

}  // namespace redsim
