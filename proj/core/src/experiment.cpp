#include "redsim/experiment.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "redsim/des.hpp"
#include "redsim/errors.hpp"
#include "redsim/fluid.hpp"
#include "redsim/hybrid.hpp"
#include "redsim/moments.hpp"

#ifndef REDSIM_VERSION
#define REDSIM_VERSION "0.0.0"
#endif

namespace redsim {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string_view version() noexcept { return REDSIM_VERSION; }

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  return os;
}

void write_json(const fs::path& path, const ordered_json& j) { open_out(path) << j.dump(2) << '\n'; }

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

constexpr const char* kLogKinds[] = {"send", "accept", "drop_red", "drop_tail", "depart",
                                     "deliver", "ack", "timeout", "end"};

std::vector<std::string> run_des(const ExperimentConfig& c, const fs::path& dir, const std::string& series_name) {
  auto cfg = c.scenario.des_config(c.duration, c.seed, c.sample_interval);
  cfg.record_event_log = c.event_log;
  const auto r = des::simulate_dumbbell(cfg);
  std::vector<std::string> files{series_name, "summary.json"};
  write_series(r.series, dir / series_name, c.format);

  std::ostringstream ss;
  des::write_summary_json(ss, r.summary);
  auto j = ordered_json::parse(ss.str());
  const double from = c.cutoff_fraction * c.duration;
  j["transient_cutoff"] = from;
  j["mean_q_post_transient"] = time_average(r.series, "q", from);
  j["events_processed"] = r.events_processed;
  j["max_queue"] = r.max_queue;
  j["warnings"] = r.warnings;
  write_json(dir / "summary.json", j);

  if (c.event_log) {
    auto os = open_out(dir / "events.csv");
    os << "t,kind,flow,seq,q,q_hat,value\n";
    for (const auto& e : r.log) {
      os << format_number(e.t) << ',' << kLogKinds[static_cast<int>(e.kind)] << ',' << e.flow_id << ',' << e.seq
         << ',' << e.q << ',' << format_number(e.q_hat) << ',' << format_number(e.value) << '\n';
    }
    files.insert(files.begin() + 1, "events.csv");
  }
  return files;
}

std::vector<std::string> run_fluid(const ExperimentConfig& c, const fs::path& dir, const std::string& series_name) {
  auto p = c.scenario.fluid_params();
  p.diffusion_mode = c.fluid.diffusion_mode;
  p.diffusion_enabled = c.fluid.diffusion;
  p.jumps_enabled = c.fluid.jumps;
  p.mean_jump_drift = c.fluid.mean_jump_drift;
  fluid::EnsembleOptions opt;
  opt.t_end = c.duration;
  opt.dt = c.dt;
  opt.n_paths = c.fluid.n_paths;
  opt.seed = c.seed;
  opt.sample_interval = c.sample_interval;
  opt.threads = c.fluid.threads;
  opt.bins = c.fluid.bins;
  opt.stationary_from = c.cutoff_fraction * c.duration;
  const auto r = fluid::simulate_paths(p, c.initial, opt);
  write_series(r.stats, dir / series_name, c.format);
  fluid::write_density_csv((dir / "density_W.csv").string(), r.w_density_stationary);
  fluid::write_density_csv((dir / "density_Q.csv").string(), r.q_density_stationary);

  ordered_json j;
  j["n_paths"] = opt.n_paths;
  j["transient_cutoff"] = opt.stationary_from;
  j["mean_W"] = time_average(r.stats, "W_mean", opt.stationary_from);
  j["mean_Q"] = time_average(r.stats, "Q_mean", opt.stationary_from);
  j["mean_Q_hat"] = time_average(r.stats, "Q_hat_mean", opt.stationary_from);
  j["density_W_integral"] = r.w_density_stationary.integral();
  j["density_Q_integral"] = r.q_density_stationary.integral();
  write_json(dir / "summary.json", j);
  return {series_name, "density_W.csv", "density_Q.csv", "summary.json"};
}

std::vector<std::string> run_moments(const ExperimentConfig& c, const fs::path& dir, const std::string& series_name) {
  const auto p = c.scenario.fluid_params();
  const moments::MomentState init{0.0, c.initial.W, c.initial.Q, c.initial.Q_hat};
  const auto series = moments::integrate(p, init, c.duration, c.dt, c.sample_interval);
  write_series(series, dir / series_name, c.format);
  const auto eq = moments::fixed_point(p);
  {
    auto os = open_out(dir / "equilibrium.json");
    moments::write_equilibrium_json(os, eq);
  }
  const double from = c.cutoff_fraction * c.duration;
  ordered_json j;
  j["transient_cutoff"] = from;
  j["mean_W"] = time_average(series, "W", from);
  j["mean_Q"] = time_average(series, "Q", from);
  j["mean_Q_hat"] = time_average(series, "Q_hat", from);
  j["final_W"] = series.channel("W").back();
  j["final_Q"] = series.channel("Q").back();
  j["final_Q_hat"] = series.channel("Q_hat").back();
  write_json(dir / "summary.json", j);
  return {series_name, "equilibrium.json", "summary.json"};
}

std::vector<std::string> run_hybrid(const ExperimentConfig& c, const fs::path& dir, const std::string& series_name) {
  auto hp = c.scenario.hybrid_params();
  hp.w_to = c.w_to;
  hybrid::HybridState init;
  init.W = c.initial.W;
  init.Q = c.initial.Q;
  init.Q_hat = c.initial.Q_hat;
  const auto r = hybrid::simulate_hybrid(hp, init, c.duration, c.dt, c.seed, c.sample_interval);
  write_series(r.series, dir / series_name, c.format);
  {
    auto os = open_out(dir / "transitions.csv");
    os << "t,event,from,to,W_before,W_after,Q_before,Q_after,Q_hat_before,Q_hat_after\n";
    for (const auto& tr : r.transitions) {
      os << format_number(tr.t) << ',' << hybrid::to_string(tr.event) << ',' << to_string(tr.from) << ','
         << to_string(tr.to) << ',' << format_number(tr.W_before) << ',' << format_number(tr.W_after) << ','
         << format_number(tr.Q_before) << ',' << format_number(tr.Q_after) << ','
         << format_number(tr.Q_hat_before) << ',' << format_number(tr.Q_hat_after) << '\n';
    }
  }
  std::uint64_t td = 0;
  std::uint64_t to = 0;
  for (const auto& tr : r.transitions) {
    td += tr.event == hybrid::HybridEvent::TD;
    to += tr.event == hybrid::HybridEvent::TO;
  }
  const double from = c.cutoff_fraction * c.duration;
  ordered_json j;
  j["loss_events"] = r.loss_events;
  j["td"] = td;
  j["to"] = to;
  j["absorbed_losses"] = r.absorbed_losses;
  j["transitions"] = r.transitions.size();
  j["transient_cutoff"] = from;
  j["mean_W"] = time_average(r.series, "W", from);
  j["mean_Q"] = time_average(r.series, "Q", from);
  write_json(dir / "summary.json", j);
  return {series_name, "transitions.csv", "summary.json"};
}

}  // namespace

void prepare_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  if (!fs::is_directory(dir)) throw IoError("output path '" + dir.string() + "' is not a directory");
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream os(probe, std::ios::binary);
    if (!os) throw IoError("output directory '" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

void write_series(const TimeSeries& series, const fs::path& path, OutputFormat format) {
  auto os = open_out(path);
  if (format == OutputFormat::Csv) {
    series.write_csv(os);
    return;
  }
  ordered_json j;
  const auto t = series.time();
  j["t"] = std::vector<double>(t.begin(), t.end());
  for (std::size_t i = 0; i < series.channel_count(); ++i) {
    const auto ch = series.channel(i);
    j[series.channel_names()[i]] = std::vector<double>(ch.begin(), ch.end());
  }
  os << j.dump() << '\n';
}

void write_manifest(const fs::path& path, const ExperimentConfig& config, std::string_view command,
                    const std::vector<std::string>& artifacts) {
  ordered_json j;
  j["tool"] = "redsim";
  j["version"] = std::string(version());
  j["command"] = std::string(command);
  j["model"] = std::string(to_string(config.model));
  j["seed"] = config.seed;
  j["config"] = serialize_config(config);
  j["artifacts"] = artifacts;
  j["created_utc"] = utc_now();
  write_json(path, j);
}

Artifacts run_experiment(const ExperimentConfig& config) {
  const fs::path dir = config.out_dir;
  prepare_output_dir(dir);
  const std::string series_name = config.format == OutputFormat::Csv ? "series.csv" : "series.json";
  Artifacts a{dir, {}};
  try {
    switch (config.model) {
      case ModelKind::Des: a.files = run_des(config, dir, series_name); break;
      case ModelKind::Fluid: a.files = run_fluid(config, dir, series_name); break;
      case ModelKind::Moments: a.files = run_moments(config, dir, series_name); break;
      case ModelKind::Hybrid: a.files = run_hybrid(config, dir, series_name); break;
    }
  } catch (const IoError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ExperimentError("model " + std::string(to_string(config.model)) + " (seed " + std::to_string(config.seed) +
                          "): " + e.what());
  }
  a.files.emplace_back("manifest.json");
  write_manifest(dir / "manifest.json", config, "sim", a.files);
  return a;
}

surrogate::Evaluator make_evaluator(const ExperimentConfig& config) {
  if (!config.surrogate) throw ConfigError("configuration has no surrogate block");
  const auto& name = config.surrogate->evaluator;
  if (name == "moments") return surrogate::moment_equilibrium_evaluator();
  if (name == "des") return surrogate::des_evaluator(config.duration, config.cutoff_fraction);
  if (name == "fluid") {
    return surrogate::fluid_evaluator(config.duration, config.dt, config.fluid.n_paths, config.cutoff_fraction);
  }
  throw ConfigError("surrogate.evaluator must be one of moments, des, fluid");
}

}  // namespace redsim
