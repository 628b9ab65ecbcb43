#include "redsim/config.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "redsim/errors.hpp"
#include "redsim/time_series.hpp"

namespace redsim {

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::Des: return "des";
    case ModelKind::Fluid: return "fluid";
    case ModelKind::Moments: return "moments";
    case ModelKind::Hybrid: return "hybrid";
  }
  return "unknown";
}

std::optional<ModelKind> model_from_string(std::string_view text) noexcept {
  if (text == "des") return ModelKind::Des;
  if (text == "fluid") return ModelKind::Fluid;
  if (text == "moments") return ModelKind::Moments;
  if (text == "hybrid") return ModelKind::Hybrid;
  return std::nullopt;
}

std::string_view to_string(OutputFormat format) noexcept {
  return format == OutputFormat::Json ? "json" : "csv";
}

std::vector<std::string> ExperimentConfig::violations() const {
  std::vector<std::string> out = scenario.violations();
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) out.push_back(std::string(name) + " must be > 0");
  };
  positive(duration, "duration");
  positive(dt, "dt");
  positive(sample_interval, "sample_interval");
  if (dt > duration) out.emplace_back("dt must not exceed duration");
  if (!(cutoff_fraction >= 0.0 && cutoff_fraction < 1.0)) out.emplace_back("cutoff_fraction must lie in [0, 1)");
  if (!(initial.W >= 1.0) || !std::isfinite(initial.W)) out.emplace_back("initial.W must be >= 1");
  if (!(initial.Q >= 0.0 && initial.Q <= static_cast<double>(scenario.buffer))) {
    out.emplace_back("initial.Q must lie in [0, network.buffer]");
  }
  if (!(initial.Q_hat >= 0.0) || !std::isfinite(initial.Q_hat)) out.emplace_back("initial.Q_hat must be >= 0");
  if (fluid.n_paths < 1) out.emplace_back("fluid.n_paths must be >= 1");
  if (fluid.threads < 1) out.emplace_back("fluid.threads must be >= 1");
  if (fluid.bins < 1) out.emplace_back("fluid.bins must be >= 1");
  if (!(w_to >= 2.0) || !std::isfinite(w_to)) out.emplace_back("hybrid.w_to must be >= 2");
  if (surrogate) {
    const auto& s = *surrogate;
    if (s.n_points < 2) out.emplace_back("surrogate.n_points must be >= 2");
    if (s.evaluator != "moments" && s.evaluator != "des" && s.evaluator != "fluid") {
      out.emplace_back("surrogate.evaluator must be one of moments, des, fluid");
    }
    if (s.replications < 1) out.emplace_back("surrogate.replications must be >= 1");
    if (s.k < 2 || s.k > s.n_points) out.emplace_back("surrogate.k must lie in [2, surrogate.n_points]");
    try {
      (void)box();
    } catch (const ConfigError& e) {
      for (const auto& v : e.violations()) out.push_back("surrogate.box: " + v);
    }
  }
  if (out_dir.empty()) out.emplace_back("output.dir must not be empty");
  return out;
}

surrogate::ParameterBox ExperimentConfig::box() const {
  if (!surrogate) throw ConfigError("configuration has no surrogate block");
  return surrogate::ParameterBox(surrogate->box, scenario);
}

namespace {

std::string where(const YAML::Mark& m) {
  if (m.line < 0) return {};
  return "line " + std::to_string(m.line + 1) + ": ";
}

class Reader {
 public:
  std::vector<std::string> errors;
  std::map<std::string, int> section_line;  // top-level section -> 1-based line

  void fail(const YAML::Node& n, const std::string& msg) { errors.push_back(where(n.Mark()) + msg); }

  bool is_map(const YAML::Node& n, const std::string& path) {
    if (n.IsMap()) return true;
    fail(n, "'" + path + "' must be a mapping");
    return false;
  }

  void check_keys(const YAML::Node& map, const std::string& path, std::initializer_list<std::string_view> allowed) {
    std::set<std::string> seen;
    for (auto it = map.begin(); it != map.end(); ++it) {
      const std::string key = it->first.Scalar();
      if (!seen.insert(key).second) fail(it->first, "duplicate key '" + qualify(path, key) + "'");
      bool ok = false;
      for (auto a : allowed) ok = ok || a == key;
      if (!ok) fail(it->first, "unknown key '" + qualify(path, key) + "'");
    }
  }

  static std::string qualify(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  bool scalar(const YAML::Node& n, const std::string& name) {
    if (n.IsScalar()) return true;
    fail(n, "'" + name + "' must be a scalar");
    return false;
  }

  void read(const YAML::Node& n, const std::string& name, double& out) {
    if (!scalar(n, name)) return;
    const std::string& s = n.Scalar();
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
      fail(n, "'" + name + "' must be a number, got '" + s + "'");
      return;
    }
    out = v;
  }

  template <typename U>
  void read_uint(const YAML::Node& n, const std::string& name, U& out) {
    if (!scalar(n, name)) return;
    const std::string& s = n.Scalar();
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || v > std::numeric_limits<U>::max()) {
      fail(n, "'" + name + "' must be a non-negative integer, got '" + s + "'");
      return;
    }
    out = static_cast<U>(v);
  }

  void read(const YAML::Node& n, const std::string& name, std::uint64_t& out) { read_uint(n, name, out); }
  void read(const YAML::Node& n, const std::string& name, unsigned& out) { read_uint(n, name, out); }

  void read(const YAML::Node& n, const std::string& name, int& out) {
    if (!scalar(n, name)) return;
    const std::string& s = n.Scalar();
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
      fail(n, "'" + name + "' must be an integer, got '" + s + "'");
      return;
    }
    out = v;
  }

  void read(const YAML::Node& n, const std::string& name, bool& out) {
    if (!scalar(n, name)) return;
    const std::string& s = n.Scalar();
    if (s == "true") out = true;
    else if (s == "false") out = false;
    else fail(n, "'" + name + "' must be true or false, got '" + s + "'");
  }

  void read(const YAML::Node& n, const std::string& name, std::string& out) {
    if (scalar(n, name)) out = n.Scalar();
  }

  template <typename T>
  void optional(const YAML::Node& map, const std::string& path, const char* key, T& out) {
    const YAML::Node n = map[key];
    if (n) read(n, qualify(path, key), out);
  }
};

ExperimentConfig build(const YAML::Node& root, Reader& r) {
  ExperimentConfig c;
  if (!r.is_map(root, "document")) return c;
  r.check_keys(root, "", {"model", "seed", "duration", "dt", "sample_interval", "cutoff_fraction", "network", "red",
                          "initial", "fluid", "hybrid", "des", "surrogate", "output"});
  for (auto it = root.begin(); it != root.end(); ++it) {
    if (it->first.Mark().line >= 0) r.section_line[it->first.Scalar()] = it->first.Mark().line + 1;
  }

  if (const auto n = root["model"]; !n) {
    r.fail(root, "missing required key 'model'");
  } else if (r.scalar(n, "model")) {
    if (auto m = model_from_string(n.Scalar())) c.model = *m;
    else r.fail(n, "'model' must be one of des, fluid, moments, hybrid, got '" + n.Scalar() + "'");
  }
  if (const auto n = root["seed"]; !n) r.fail(root, "missing required key 'seed'");
  else r.read(n, "seed", c.seed);

  r.optional(root, "", "duration", c.duration);
  r.optional(root, "", "dt", c.dt);
  r.optional(root, "", "sample_interval", c.sample_interval);
  r.optional(root, "", "cutoff_fraction", c.cutoff_fraction);

  if (const auto n = root["network"]; n && r.is_map(n, "network")) {
    r.check_keys(n, "network", {"capacity", "prop_delay", "n_flows", "buffer"});
    r.optional(n, "network", "capacity", c.scenario.capacity);
    r.optional(n, "network", "prop_delay", c.scenario.prop_delay);
    r.optional(n, "network", "n_flows", c.scenario.n_flows);
    r.optional(n, "network", "buffer", c.scenario.buffer);
  }
  if (const auto n = root["red"]; n && r.is_map(n, "red")) {
    r.check_keys(n, "red", {"q_min", "q_max", "p_max", "w_q"});
    r.optional(n, "red", "q_min", c.scenario.red.q_min);
    r.optional(n, "red", "q_max", c.scenario.red.q_max);
    r.optional(n, "red", "p_max", c.scenario.red.p_max);
    if (const auto w = n["w_q"]; w) {
      if (w.IsScalar() && w.Scalar() == "auto") {
        c.scenario.w_q_auto = true;
      } else {
        c.scenario.w_q_auto = false;
        r.read(w, "red.w_q", c.scenario.red.w_q);
      }
    }
  }
  if (const auto n = root["initial"]; n && r.is_map(n, "initial")) {
    r.check_keys(n, "initial", {"W", "Q", "Q_hat"});
    r.optional(n, "initial", "W", c.initial.W);
    r.optional(n, "initial", "Q", c.initial.Q);
    r.optional(n, "initial", "Q_hat", c.initial.Q_hat);
  }
  if (const auto n = root["fluid"]; n && r.is_map(n, "fluid")) {
    r.check_keys(n, "fluid", {"n_paths", "threads", "bins", "diffusion_mode", "diffusion", "jumps", "mean_jump_drift"});
    r.optional(n, "fluid", "n_paths", c.fluid.n_paths);
    r.optional(n, "fluid", "threads", c.fluid.threads);
    r.optional(n, "fluid", "bins", c.fluid.bins);
    if (const auto m = n["diffusion_mode"]; m && r.scalar(m, "fluid.diffusion_mode")) {
      if (m.Scalar() == "sum_rates") c.fluid.diffusion_mode = fluid::DiffusionMode::SumRates;
      else if (m.Scalar() == "as_written_clamped") c.fluid.diffusion_mode = fluid::DiffusionMode::AsWrittenClamped;
      else r.fail(m, "'fluid.diffusion_mode' must be sum_rates or as_written_clamped, got '" + m.Scalar() + "'");
    }
    r.optional(n, "fluid", "diffusion", c.fluid.diffusion);
    r.optional(n, "fluid", "jumps", c.fluid.jumps);
    r.optional(n, "fluid", "mean_jump_drift", c.fluid.mean_jump_drift);
  }
  if (const auto n = root["hybrid"]; n && r.is_map(n, "hybrid")) {
    r.check_keys(n, "hybrid", {"w_to"});
    r.optional(n, "hybrid", "w_to", c.w_to);
  }
  if (const auto n = root["des"]; n && r.is_map(n, "des")) {
    r.check_keys(n, "des", {"event_log"});
    r.optional(n, "des", "event_log", c.event_log);
  }
  if (const auto n = root["surrogate"]; n && r.is_map(n, "surrogate")) {
    r.check_keys(n, "surrogate", {"box", "n_points", "evaluator", "replications", "kind", "k", "refine"});
    SurrogateBlock s;
    if (const auto b = n["box"]; !b) {
      r.fail(n, "missing required key 'surrogate.box'");
    } else if (!b.IsSequence() || b.size() == 0) {
      r.fail(b, "'surrogate.box' must be a non-empty list of {name, lower, upper}");
    } else {
      for (const auto& d : b) {
        if (!r.is_map(d, "surrogate.box[]")) continue;
        r.check_keys(d, "surrogate.box[]", {"name", "lower", "upper"});
        surrogate::Dimension dim;
        for (const char* key : {"name", "lower", "upper"}) {
          if (!d[key]) r.fail(d, std::string("missing required key 'surrogate.box[].") + key + "'");
        }
        r.optional(d, "surrogate.box[]", "name", dim.name);
        r.optional(d, "surrogate.box[]", "lower", dim.lower);
        r.optional(d, "surrogate.box[]", "upper", dim.upper);
        s.box.push_back(dim);
      }
    }
    std::uint64_t n_points = s.n_points;
    std::uint64_t reps = s.replications;
    std::uint64_t k = s.k;
    std::uint64_t refine = s.refine;
    r.optional(n, "surrogate", "n_points", n_points);
    r.optional(n, "surrogate", "evaluator", s.evaluator);
    r.optional(n, "surrogate", "replications", reps);
    r.optional(n, "surrogate", "k", k);
    r.optional(n, "surrogate", "refine", refine);
    s.n_points = n_points;
    s.replications = reps;
    s.k = k;
    s.refine = refine;
    if (const auto kn = n["kind"]; kn && r.scalar(kn, "surrogate.kind")) {
      try {
        s.kind = surrogate::kind_from_string(kn.Scalar());
      } catch (const DomainError&) {
        r.fail(kn, "'surrogate.kind' must be polynomial2 or rbf_gaussian, got '" + kn.Scalar() + "'");
      }
    }
    c.surrogate = std::move(s);
  }
  if (const auto n = root["output"]; n && r.is_map(n, "output")) {
    r.check_keys(n, "output", {"dir", "format"});
    r.optional(n, "output", "dir", c.out_dir);
    if (const auto f = n["format"]; f && r.scalar(f, "output.format")) {
      if (f.Scalar() == "csv") c.format = OutputFormat::Csv;
      else if (f.Scalar() == "json") c.format = OutputFormat::Json;
      else r.fail(f, "'output.format' must be csv or json, got '" + f.Scalar() + "'");
    }
  }
  return c;
}

// Attach the line of the owning section to an invariant message such as
// "red.q_min must be < red.q_max".
std::string locate(const Reader& r, const std::string& msg) {
  const auto end = msg.find_first_of(".: ");
  const std::string section = msg.substr(0, end);
  if (auto it = r.section_line.find(section); it != r.section_line.end()) {
    return "line " + std::to_string(it->second) + ": " + msg;
  }
  return msg;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError(where(e.mark) + e.msg);
  }
  if (!root || root.IsNull()) throw ConfigError("empty configuration document");
  Reader r;
  ExperimentConfig c = build(root, r);
  // Fields that failed to parse keep their defaults, so the invariant checks
  // still run and report alongside the structural errors.
  for (const auto& v : c.violations()) r.errors.push_back(locate(r, v));
  if (!r.errors.empty()) throw ConfigError(std::move(r.errors));
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  auto num = [](double v) { return format_number(v); };
  auto flag = [](bool b) { return b ? "true" : "false"; };
  os << "model: " << to_string(c.model) << '\n'
     << "seed: " << c.seed << '\n'
     << "duration: " << num(c.duration) << '\n'
     << "dt: " << num(c.dt) << '\n'
     << "sample_interval: " << num(c.sample_interval) << '\n'
     << "cutoff_fraction: " << num(c.cutoff_fraction) << '\n'
     << "network:\n"
     << "  capacity: " << num(c.scenario.capacity) << '\n'
     << "  prop_delay: " << num(c.scenario.prop_delay) << '\n'
     << "  n_flows: " << c.scenario.n_flows << '\n'
     << "  buffer: " << c.scenario.buffer << '\n'
     << "red:\n"
     << "  q_min: " << num(c.scenario.red.q_min) << '\n'
     << "  q_max: " << num(c.scenario.red.q_max) << '\n'
     << "  p_max: " << num(c.scenario.red.p_max) << '\n'
     << "  w_q: " << (c.scenario.w_q_auto ? std::string("auto") : num(c.scenario.red.w_q)) << '\n'
     << "initial:\n"
     << "  W: " << num(c.initial.W) << '\n'
     << "  Q: " << num(c.initial.Q) << '\n'
     << "  Q_hat: " << num(c.initial.Q_hat) << '\n'
     << "fluid:\n"
     << "  n_paths: " << c.fluid.n_paths << '\n'
     << "  threads: " << c.fluid.threads << '\n'
     << "  bins: " << c.fluid.bins << '\n'
     << "  diffusion_mode: "
     << (c.fluid.diffusion_mode == fluid::DiffusionMode::SumRates ? "sum_rates" : "as_written_clamped") << '\n'
     << "  diffusion: " << flag(c.fluid.diffusion) << '\n'
     << "  jumps: " << flag(c.fluid.jumps) << '\n'
     << "  mean_jump_drift: " << flag(c.fluid.mean_jump_drift) << '\n'
     << "hybrid:\n"
     << "  w_to: " << num(c.w_to) << '\n'
     << "des:\n"
     << "  event_log: " << flag(c.event_log) << '\n';
  if (c.surrogate) {
    const auto& s = *c.surrogate;
    os << "surrogate:\n  box:\n";
    for (const auto& d : s.box) {
      os << "    - {name: " << d.name << ", lower: " << num(d.lower) << ", upper: " << num(d.upper) << "}\n";
    }
    os << "  n_points: " << s.n_points << '\n'
       << "  evaluator: " << s.evaluator << '\n'
       << "  replications: " << s.replications << '\n'
       << "  kind: " << surrogate::to_string(s.kind) << '\n'
       << "  k: " << s.k << '\n'
       << "  refine: " << s.refine << '\n';
  }
  os << "output:\n"
     << "  dir: " << quoted(c.out_dir) << '\n'
     << "  format: " << to_string(c.format) << '\n';
  return os.str();
}

}  // namespace redsim
