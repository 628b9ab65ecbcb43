// redsim: command-line front end for the RED/TCP model toolkit.
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "redsim/compare.hpp"
#include "redsim/config.hpp"
#include "redsim/errors.hpp"
#include "redsim/experiment.hpp"
#include "redsim/moments.hpp"
#include "redsim/oscillation.hpp"
#include "redsim/rng.hpp"
#include "redsim/surrogate.hpp"

namespace fs = std::filesystem;
using namespace redsim;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
};

void add_common(CLI::App* cmd, Common& c, bool need_config) {
  auto* opt = cmd->add_option("--config", c.config, "YAML run configuration");
  if (need_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the configured seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--format", c.format, "series format")->check(CLI::IsMember({"csv", "json"}));
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (c.format == "json") cfg.format = OutputFormat::Json;
  if (c.format == "csv") cfg.format = OutputFormat::Csv;
  return cfg;
}

TimeSeries read_series(const std::string& path) {
  if (fs::path(path).extension() != ".json") return TimeSeries::read_csv(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  const auto j = nlohmann::ordered_json::parse(in);
  std::vector<std::string> names;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "t") names.push_back(it.key());
  }
  TimeSeries s(names);
  const auto t = j.at("t").get<std::vector<double>>();
  std::vector<double> row(names.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t c = 0; c < names.size(); ++c) row[c] = j.at(names[c]).at(i).get<double>();
    s.append(t[i], row);
  }
  return s;
}

// Writes `text` to DIR/name when an output directory was given, else stdout.
void emit(const std::string& dir, const std::string& name, const std::string& text) {
  if (dir.empty()) {
    std::cout << text;
    return;
  }
  prepare_output_dir(dir);
  std::ofstream os(fs::path(dir) / name, std::ios::binary);
  if (!os) throw IoError("cannot write " + (fs::path(dir) / name).string());
  os << text;
  std::cout << (fs::path(dir) / name).string() << '\n';
}

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> p;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      std::size_t pos = 0;
      p.push_back(std::stod(field, &pos));
      if (pos != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw ConfigError("bad coordinate '" + field + "' in --point");
    }
  }
  return p;
}

std::string dataset_stem(const fs::path& dir) { return (dir / "dataset").string(); }

surrogate::LoadedDataset load_dataset(const fs::path& dir) {
  return surrogate::read_dataset(dataset_stem(dir) + ".csv", dataset_stem(dir) + ".json");
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error:\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"redsim: TCP Reno over RED, packet / fluid / moment / hybrid models"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);
  int status = kOk;

  // sim
  Common sim_opts;
  std::string sim_model;
  auto* sim = app.add_subcommand("sim", "run one model and write series, summary and manifest");
  add_common(sim, sim_opts, true);
  sim->add_option("--model", sim_model, "model to run (overrides the config)")
      ->check(CLI::IsMember({"des", "fluid", "moments", "hybrid"}));
  sim->callback([&] {
    status = guarded([&] {
      auto cfg = resolve(sim_opts);
      if (!sim_model.empty()) cfg.model = *model_from_string(sim_model);
      const auto a = run_experiment(cfg);
      for (const auto& f : a.files) std::cout << (a.dir / f).string() << '\n';
    });
  });

  // equilibrium
  Common eq_opts;
  auto* eq = app.add_subcommand("equilibrium", "moment-model fixed point");
  add_common(eq, eq_opts, false);
  eq->callback([&] {
    status = guarded([&] {
      ExperimentConfig cfg;
      cfg.scenario = reference_scenario();
      if (!eq_opts.config.empty()) cfg = resolve(eq_opts);
      const auto result = moments::fixed_point(cfg.scenario.fluid_params());
      std::ostringstream os;
      moments::write_equilibrium_json(os, result);
      emit(eq_opts.out, "equilibrium.json", os.str());
    });
  });

  // surrogate
  auto* sur = app.add_subcommand("surrogate", "sampling plan, evaluation, fitting and assessment");
  sur->require_subcommand(1);
  Common plan_opts;
  auto* plan = sur->add_subcommand("plan", "Latin hypercube plan -> OUT/plan.csv");
  add_common(plan, plan_opts, true);
  plan->callback([&] {
    status = guarded([&] {
      const auto cfg = resolve(plan_opts);
      const auto box = cfg.box();
      const auto pts = surrogate::sample_plan(box, cfg.surrogate->n_points, cfg.seed);
      prepare_output_dir(cfg.out_dir);
      {
        std::ofstream os(fs::path(cfg.out_dir) / "plan.csv", std::ios::binary);
        surrogate::write_plan_csv(os, box, pts);
      }
      write_manifest(fs::path(cfg.out_dir) / "manifest.json", cfg, "surrogate plan", {"plan.csv", "manifest.json"});
      std::cout << (fs::path(cfg.out_dir) / "plan.csv").string() << '\n';
    });
  });

  Common eval_opts;
  std::string plan_path;
  auto* ev = sur->add_subcommand("eval", "evaluate a plan -> OUT/dataset.csv + dataset.json");
  add_common(ev, eval_opts, true);
  ev->add_option("--plan", plan_path, "plan CSV (default OUT/plan.csv)");
  ev->callback([&] {
    status = guarded([&] {
      const auto cfg = resolve(eval_opts);
      const auto box = cfg.box();
      const fs::path dir = cfg.out_dir;
      prepare_output_dir(dir);
      const std::string path = plan_path.empty() ? (dir / "plan.csv").string() : plan_path;
      std::ifstream in(path, std::ios::binary);
      if (!in) throw DataError("cannot open plan '" + path + "'");
      const auto pts = surrogate::read_plan_csv(in, box);
      const auto evaluator = make_evaluator(cfg);
      const auto& s = *cfg.surrogate;
      auto data = surrogate::evaluate_design(box, pts, evaluator, s.replications, cfg.seed);
      if (s.refine > 0) {
        const auto extra = surrogate::refinement_points(box, data, s.kind, std::min(s.k, data.rows()), s.refine, cfg.seed);
        const auto more = surrogate::evaluate_design(box, extra, evaluator, s.replications, substream_seed(cfg.seed, 1U << 20));
        for (std::size_t i = 0; i < more.rows(); ++i) {
          data.points.push_back(more.points[i]);
          data.responses.push_back(more.responses[i]);
          data.response_sd.push_back(more.response_sd[i]);
          data.provenance.push_back(more.provenance[i] + " refine");
        }
        data.failures.insert(data.failures.end(), more.failures.begin(), more.failures.end());
      }
      surrogate::write_dataset(dataset_stem(dir) + ".csv", dataset_stem(dir) + ".json", box, data, evaluator.name,
                               cfg.seed, s.replications);
      write_manifest(dir / "manifest.json", cfg, "surrogate eval", {"dataset.csv", "dataset.json", "manifest.json"});
      std::cout << dataset_stem(dir) << ".csv (" << data.rows() << " rows, " << data.failures.size()
                << " failures)\n";
    });
  });

  Common fit_opts;
  auto* fitc = sur->add_subcommand("fit", "fit OUT/dataset -> OUT/model.json (with CV accuracy)");
  add_common(fitc, fit_opts, true);
  fitc->callback([&] {
    status = guarded([&] {
      const auto cfg = resolve(fit_opts);
      const fs::path dir = cfg.out_dir;
      (void)cfg.box();  // config errors before data errors
      const auto& s = *cfg.surrogate;
      const auto loaded = load_dataset(dir);
      auto model = surrogate::fit(loaded.box, loaded.data, s.kind);
      model.accuracy = surrogate::assess(loaded.box, loaded.data, s.kind, s.k, cfg.seed);
      std::ofstream(dir / "model.json", std::ios::binary) << surrogate::model_to_json(model) << '\n';
      std::cout << (dir / "model.json").string() << '\n';
    });
  });

  Common assess_opts;
  auto* asc = sur->add_subcommand("assess", "k-fold cross-validation of OUT/dataset -> OUT/accuracy.json");
  add_common(asc, assess_opts, true);
  asc->callback([&] {
    status = guarded([&] {
      const auto cfg = resolve(assess_opts);
      const fs::path dir = cfg.out_dir;
      (void)cfg.box();  // config errors before data errors
      const auto& s = *cfg.surrogate;
      const auto loaded = load_dataset(dir);
      const auto rep = surrogate::assess(loaded.box, loaded.data, s.kind, s.k, cfg.seed);
      const std::string text = surrogate::report_to_json(rep) + "\n";
      std::ofstream(dir / "accuracy.json", std::ios::binary) << text;
      std::cout << text;
    });
  });

  std::string model_path;
  std::vector<std::string> points;
  std::string predict_format = "csv";
  auto* pred = sur->add_subcommand("predict", "evaluate a fitted model at points");
  pred->add_option("--model", model_path, "model JSON")->required()->check(CLI::ExistingFile);
  pred->add_option("--point", points, "comma-separated coordinates (repeatable)")->required();
  pred->add_option("--format", predict_format)->check(CLI::IsMember({"csv", "json"}));
  pred->callback([&] {
    status = guarded([&] {
      std::ifstream in(model_path, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      const auto model = surrogate::model_from_json(ss.str());
      if (predict_format == "csv") {
        for (const auto& n : model.box.names()) std::cout << n << ',';
        for (const auto& r : model.responses) std::cout << r.name << ',';
        std::cout << "extrapolated\n";
      }
      auto rows = nlohmann::ordered_json::array();
      for (const auto& text : points) {
        const auto x = parse_point(text);
        if (x.size() != model.box.size()) {
          throw ConfigError("--point '" + text + "' has " + std::to_string(x.size()) + " coordinates, model expects " +
                            std::to_string(model.box.size()));
        }
        const auto p = surrogate::predict(model, x);
        if (predict_format == "csv") {
          for (double v : x) std::cout << format_number(v) << ',';
          for (double v : p.values) std::cout << format_number(v) << ',';
          std::cout << (p.extrapolated ? "true" : "false") << '\n';
        } else {
          nlohmann::ordered_json r;
          r["point"] = x;
          for (std::size_t i = 0; i < p.values.size(); ++i) r[model.responses[i].name] = p.values[i];
          r["extrapolated"] = p.extrapolated;
          rows.push_back(r);
        }
      }
      if (predict_format == "json") std::cout << rows.dump(2) << '\n';
    });
  });

  // compare
  std::string cmp_a;
  std::string cmp_b;
  std::vector<std::string> cmp_channels;
  std::optional<double> cmp_cutoff;
  std::optional<double> cmp_step;
  std::string cmp_out;
  std::string cmp_format = "csv";
  auto* cmp = app.add_subcommand("compare", "compare two series on a common grid");
  cmp->add_option("series_a", cmp_a)->required()->check(CLI::ExistingFile);
  cmp->add_option("series_b", cmp_b)->required()->check(CLI::ExistingFile);
  cmp->add_option("--channels", cmp_channels, "pairs A:B (or one name used for both)")->required();
  cmp->add_option("--cutoff", cmp_cutoff, "transient cutoff in seconds (default: 20% into the overlap)");
  cmp->add_option("--step", cmp_step, "grid step in seconds");
  cmp->add_option("--out", cmp_out, "write comparison.csv|json here instead of stdout");
  cmp->add_option("--format", cmp_format)->check(CLI::IsMember({"csv", "json"}));
  cmp->callback([&] {
    status = guarded([&] {
      std::vector<ChannelPair> pairs;
      for (const auto& c : cmp_channels) {
        const auto colon = c.find(':');
        pairs.push_back(colon == std::string::npos ? ChannelPair{c, c}
                                                   : ChannelPair{c.substr(0, colon), c.substr(colon + 1)});
      }
      const auto rep = compare(read_series(cmp_a), read_series(cmp_b), pairs, {cmp_cutoff, cmp_step});
      std::ostringstream os;
      if (cmp_format == "json") write_report_json(os, rep);
      else write_report_csv(os, rep);
      emit(cmp_out, "comparison." + cmp_format, os.str());
    });
  });

  // oscillation
  std::string osc_series;
  std::string osc_channel;
  OscillationOptions osc_options;
  std::string osc_out;
  auto* osc = app.add_subcommand("oscillation", "periodogram-based self-oscillation detector");
  osc->add_option("series", osc_series)->required()->check(CLI::ExistingFile);
  osc->add_option("--channel", osc_channel)->required();
  osc->add_option("--cutoff", osc_options.cutoff, "ignore samples before this time");
  osc->add_option("--threshold", osc_options.threshold, "peak-to-median power ratio for detection");
  osc->add_option("--out", osc_out, "write oscillation.json here instead of stdout");
  osc->callback([&] {
    status = guarded([&] {
      const auto rep = detect_oscillation(read_series(osc_series), osc_channel, osc_options);
      std::ostringstream os;
      write_oscillation_json(os, rep);
      emit(osc_out, "oscillation.json", os.str());
    });
  });

  // batch
  std::vector<std::string> batch_configs;
  std::optional<std::uint64_t> batch_seed;
  std::string batch_out;
  unsigned batch_jobs = 1;
  auto* batch = app.add_subcommand("batch", "run several configs; with --out each gets OUT/<config stem>");
  batch->add_option("configs", batch_configs)->required()->check(CLI::ExistingFile);
  batch->add_option("--seed", batch_seed, "override every config's seed");
  batch->add_option("--out", batch_out, "parent output directory");
  batch->add_option("--jobs", batch_jobs, "parallel experiments")->check(CLI::PositiveNumber);
  batch->callback([&] {
    std::vector<ExperimentConfig> cfgs;
    status = guarded([&] {
      std::vector<std::string> errors;
      for (const auto& path : batch_configs) {
        try {
          auto cfg = load_config(path);
          if (batch_seed) cfg.seed = *batch_seed;
          if (!batch_out.empty()) cfg.out_dir = (fs::path(batch_out) / fs::path(path).stem()).string();
          cfgs.push_back(std::move(cfg));
        } catch (const ConfigError& e) {
          for (const auto& v : e.violations()) errors.push_back(path + ": " + v);
        }
      }
      if (!errors.empty()) throw ConfigError(errors);
    });
    if (status != kOk) return;
    std::atomic<std::size_t> next{0};
    std::atomic<int> worst{kOk};
    std::mutex io;
    auto worker = [&] {
      for (std::size_t i = next++; i < cfgs.size(); i = next++) {
        const int rc = guarded([&] {
          const auto a = run_experiment(cfgs[i]);
          std::lock_guard lock(io);
          std::cout << batch_configs[i] << " -> " << a.dir.string() << '\n';
        });
        int cur = worst.load();
        while (rc > cur && !worst.compare_exchange_weak(cur, rc)) {
        }
      }
    };
    {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < std::min<std::size_t>(batch_jobs, cfgs.size()); ++t) pool.emplace_back(worker);
    }
    status = worst.load();
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }
  return status;
}
