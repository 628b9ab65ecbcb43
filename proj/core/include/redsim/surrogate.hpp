#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "redsim/scenario.hpp"

namespace redsim::surrogate {

using Point = std::vector<double>;

struct Dimension {
  std::string name;  // one of p_max, q_min, q_max, w_q, C, T_p, n_flows
  double lower = 0.0;
  double upper = 1.0;

  friend bool operator==(const Dimension&, const Dimension&) = default;
};

// Axis-aligned box over scenario parameters. Construction checks that every
// point of the box yields a valid scenario when applied to `base`.
class ParameterBox {
 public:
  ParameterBox(std::vector<Dimension> dims, Scenario base);

  std::size_t size() const noexcept { return dims_.size(); }
  const std::vector<Dimension>& dims() const noexcept { return dims_; }
  const Scenario& base() const noexcept { return base_; }
  std::vector<std::string> names() const;

  bool contains(const Point& x) const;
  Point normalize(const Point& x) const;    // per-dimension affine map to [0, 1]
  Point denormalize(const Point& u) const;

  // Base scenario with the point's coordinates substituted.
  Scenario apply(const Point& x) const;

  friend bool operator==(const ParameterBox&, const ParameterBox&) = default;

 private:
  std::vector<Dimension> dims_;
  Scenario base_;
};

// Latin hypercube: in every dimension the n points fall one per equal-width
// bin, jittered uniformly inside the bin.
std::vector<Point> sample_plan(const ParameterBox& box, std::size_t n, std::uint64_t seed);

struct Failure {
  Point point;
  std::string reason;
};

struct Dataset {
  std::vector<std::string> dim_names;
  std::vector<std::string> response_names;
  std::vector<Point> points;
  std::vector<std::vector<double>> responses;
  std::vector<std::vector<double>> response_sd;  // per row; zeros for deterministic evaluators
  std::vector<std::string> provenance;
  std::vector<Failure> failures;

  std::size_t rows() const noexcept { return points.size(); }
  std::vector<double> response_column(std::size_t j) const;
};

// Simulator adapter: evaluates one design point with one seed.
struct Evaluator {
  std::string name;
  std::vector<std::string> responses;
  bool stochastic = false;
  std::function<std::vector<double>(const Scenario&, std::uint64_t seed)> run;
};

// Moment-model equilibrium: responses Q_star, W_star.
Evaluator moment_equilibrium_evaluator();
// Packet simulator: mean_q, drop_fraction, throughput over [cutoff, duration].
Evaluator des_evaluator(double duration, double cutoff_fraction = 0.2);
// Langevin ensemble: mean_W, mean_Q time-averaged after the cutoff.
Evaluator fluid_evaluator(double duration, double dt, std::size_t n_paths, double cutoff_fraction = 0.2);

// Runs the evaluator at every point; stochastic evaluators are averaged over
// `replications` split seeds and the sample standard deviation is stored.
// A point whose evaluation throws becomes a failure record.
Dataset evaluate_design(const ParameterBox& box, const std::vector<Point>& points,
                        const Evaluator& evaluator, std::size_t replications, std::uint64_t seed);

enum class Kind { Polynomial2, RbfGaussian };
std::string_view to_string(Kind kind) noexcept;
Kind kind_from_string(std::string_view text);

struct ResponseAccuracy {
  std::string name;
  double rmse = 0.0;
  double relative_rmse = 0.0;  // rmse / (max - min) of the response
  double r2 = 0.0;
  bool r2_defined = true;      // false when the response has zero variance
};

struct AccuracyReport {
  std::size_t k = 0;
  std::size_t holdout_size = 0;  // largest fold
  std::vector<ResponseAccuracy> responses;
};

struct ResponseModel {
  std::string name;
  Eigen::VectorXd coefficients;  // polynomial terms or RBF weights
  Eigen::MatrixXd centers;       // RBF centers in normalized coordinates (rows)
  double shape = 0.0;            // RBF shape parameter
  double offset = 0.0;           // RBF constant term
  double training_residual = 0.0;
  bool r2_defined = true;
};

struct SurrogateModel {
  Kind kind = Kind::Polynomial2;
  ParameterBox box;
  std::vector<ResponseModel> responses;
  std::optional<AccuracyReport> accuracy;
};

struct Prediction {
  std::vector<double> values;
  bool extrapolated = false;
};

// Names of the quadratic basis terms for the given dimension names.
std::vector<std::string> polynomial_terms(const std::vector<std::string>& dim_names);

// Least-squares quadratic (Polynomial2) or Gaussian RBF interpolant with
// leave-one-out shape selection (RbfGaussian), one model per response.
SurrogateModel fit(const ParameterBox& box, const Dataset& data, Kind kind);

Prediction predict(const SurrogateModel& model, const Point& x);

// k-fold cross-validation. Rows are put in canonical order, shuffled with
// `seed`, and assigned to fold (position mod k).
AccuracyReport assess(const ParameterBox& box, const Dataset& data, Kind kind, std::size_t k,
                      std::uint64_t seed = 0);

// One-shot refinement: midpoints between each of the m rows with the largest
// cross-validation error and their nearest design neighbour.
std::vector<Point> refinement_points(const ParameterBox& box, const Dataset& data, Kind kind,
                                     std::size_t k, std::size_t m, std::uint64_t seed = 0);

// Persistence. Datasets are CSV (dims, responses, *_sd, provenance) plus a
// JSON sidecar; models and reports are JSON.
void write_dataset(const std::string& csv_path, const std::string& json_path,
                   const ParameterBox& box, const Dataset& data, const std::string& evaluator,
                   std::uint64_t seed, std::size_t replications);
struct LoadedDataset {
  ParameterBox box;
  Dataset data;
};
LoadedDataset read_dataset(const std::string& csv_path, const std::string& json_path);

void write_plan_csv(std::ostream& os, const ParameterBox& box, const std::vector<Point>& points);
std::vector<Point> read_plan_csv(std::istream& is, const ParameterBox& box);

std::string model_to_json(const SurrogateModel& model);
SurrogateModel model_from_json(const std::string& text);
std::string report_to_json(const AccuracyReport& report);

std::string box_to_json(const ParameterBox& box);
ParameterBox box_from_json(const std::string& text);

}  // namespace redsim::surrogate
