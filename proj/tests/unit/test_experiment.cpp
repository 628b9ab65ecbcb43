#include <catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "redsim/config.hpp"
#include "redsim/errors.hpp"
#include "redsim/experiment.hpp"

using namespace redsim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "redsim_experiment_test" / name;
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig base(ModelKind model, const fs::path& out) {
  ExperimentConfig c;
  c.model = model;
  c.seed = 21;
  c.duration = 10.0;
  c.out_dir = out.string();
  c.fluid.n_paths = 8;
  return c;
}

}  // namespace

TEST_CASE("identical configs give identical artifacts", "[experiment]") {
  for (auto model : {ModelKind::Des, ModelKind::Fluid, ModelKind::Moments, ModelKind::Hybrid}) {
    auto c1 = base(model, scratch("a"));
    auto c2 = base(model, scratch("b"));
    c1.event_log = c2.event_log = true;
    const auto a1 = run_experiment(c1);
    const auto a2 = run_experiment(c2);
    REQUIRE(a1.files == a2.files);
    CHECK(a1.files.back() == "manifest.json");
    for (const auto& f : a1.files) {
      if (f == "manifest.json") continue;
      INFO(std::string(to_string(model)) + " " + f);
      CHECK(slurp(a1.dir / f) == slurp(a2.dir / f));
    }
  }
}

TEST_CASE("model specific artifacts", "[experiment]") {
  auto c = base(ModelKind::Moments, scratch("m"));
  auto files = run_experiment(c).files;
  CHECK(std::find(files.begin(), files.end(), "equilibrium.json") != files.end());

  c = base(ModelKind::Hybrid, scratch("h"));
  c.format = OutputFormat::Json;
  files = run_experiment(c).files;
  CHECK(std::find(files.begin(), files.end(), "transitions.csv") != files.end());
  CHECK(std::find(files.begin(), files.end(), "series.json") != files.end());

  c = base(ModelKind::Fluid, scratch("f"));
  files = run_experiment(c).files;
  CHECK(std::find(files.begin(), files.end(), "density_W.csv") != files.end());
  CHECK(std::find(files.begin(), files.end(), "density_Q.csv") != files.end());
}

TEST_CASE("manifest records the run", "[experiment]") {
  const auto c = base(ModelKind::Moments, scratch("manifest"));
  const auto art = run_experiment(c);
  const auto j = nlohmann::json::parse(slurp(art.dir / "manifest.json"));
  CHECK(j.at("seed").get<std::uint64_t>() == 21);
  CHECK(j.at("version").get<std::string>() == std::string(version()));
  CHECK(parse_config(j.at("config").get<std::string>()) == c);
  CHECK(j.at("artifacts").size() == art.files.size());
}

TEST_CASE("unwritable output fails before any computation", "[experiment]") {
  const auto blocker = scratch("blocker");
  fs::create_directories(blocker.parent_path());
  std::ofstream(blocker) << "not a directory";
  auto c = base(ModelKind::Des, blocker / "sub");
  c.duration = 1e6;  // would take far too long if it ran
  CHECK_THROWS_AS(run_experiment(c), IoError);
  c.out_dir = blocker.string();
  CHECK_THROWS_AS(run_experiment(c), IoError);
}

TEST_CASE("model failures name model and seed", "[experiment]") {
  auto c = base(ModelKind::Moments, scratch("fail"));
  c.scenario.red = {0.5, 1.0, 0.001, c.scenario.red.w_q};
  try {
    (void)run_experiment(c);
    SUCCEED("solver found an equilibrium");
  } catch (const ExperimentError& e) {
    CHECK(std::string(e.what()).find("moments") != std::string::npos);
    CHECK(std::string(e.what()).find("21") != std::string::npos);
  }
}

TEST_CASE("series writer formats", "[experiment]") {
  TimeSeries s({"a"});
  s.append(0.0, {1.0});
  s.append(0.5, {2.0});
  const auto dir = scratch("series");
  prepare_output_dir(dir);
  write_series(s, dir / "s.csv", OutputFormat::Csv);
  write_series(s, dir / "s.json", OutputFormat::Json);
  CHECK(TimeSeries::read_csv((dir / "s.csv").string()) == s);
  const auto j = nlohmann::json::parse(slurp(dir / "s.json"));
  CHECK(j.dump().find("\"a\"") != std::string::npos);
}
