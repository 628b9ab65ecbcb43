#include "redsim/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "redsim/errors.hpp"
#include "redsim/fluid.hpp"
#include "redsim/moments.hpp"
#include "redsim/rng.hpp"

namespace redsim::surrogate {

using nlohmann::ordered_json;

namespace {

const std::set<std::string, std::less<>> kKnownDims{"p_max", "q_min", "q_max", "w_q", "C", "T_p", "n_flows"};

// Fisher-Yates driven by RandomStream::uniform so plans do not depend on the
// standard library's distribution implementations.
void shuffle(std::vector<std::size_t>& v, RandomStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterBox

ParameterBox::ParameterBox(std::vector<Dimension> dims, Scenario base)
    : dims_(std::move(dims)), base_(std::move(base)) {
  std::vector<std::string> errors;
  std::set<std::string> seen;
  if (dims_.empty()) errors.emplace_back("parameter box needs at least one dimension");
  for (const auto& d : dims_) {
    if (!kKnownDims.contains(d.name)) errors.push_back("unknown box dimension '" + d.name + "'");
    if (!seen.insert(d.name).second) errors.push_back("duplicate box dimension '" + d.name + "'");
    if (!std::isfinite(d.lower) || !std::isfinite(d.upper) || !(d.lower < d.upper)) {
      errors.push_back("box dimension '" + d.name + "' needs finite lower < upper");
    }
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));

  // Scenario validity is monotone in each coordinate, so the corners suffice.
  std::set<std::string> corner_errors;
  const std::size_t d = dims_.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    Point corner(d);
    for (std::size_t i = 0; i < d; ++i) corner[i] = (mask >> i) & 1U ? dims_[i].upper : dims_[i].lower;
    for (auto& v : apply(corner).violations()) corner_errors.insert(std::move(v));
  }
  if (!corner_errors.empty()) {
    std::vector<std::string> out;
    for (const auto& e : corner_errors) out.push_back("box corner violates: " + e);
    throw ConfigError(std::move(out));
  }
}

std::vector<std::string> ParameterBox::names() const {
  std::vector<std::string> out;
  for (const auto& d : dims_) out.push_back(d.name);
  return out;
}

bool ParameterBox::contains(const Point& x) const {
  if (x.size() != dims_.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= dims_[i].lower && x[i] <= dims_[i].upper)) return false;
  }
  return true;
}

Point ParameterBox::normalize(const Point& x) const {
  if (x.size() != dims_.size()) throw DomainError("point dimension does not match the box");
  Point u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    u[i] = (x[i] - dims_[i].lower) / (dims_[i].upper - dims_[i].lower);
  }
  return u;
}

Point ParameterBox::denormalize(const Point& u) const {
  if (u.size() != dims_.size()) throw DomainError("point dimension does not match the box");
  Point x(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    x[i] = dims_[i].lower + u[i] * (dims_[i].upper - dims_[i].lower);
  }
  return x;
}

Scenario ParameterBox::apply(const Point& x) const {
  if (x.size() != dims_.size()) throw DomainError("point dimension does not match the box");
  Scenario s = base_;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::string& n = dims_[i].name;
    if (n == "p_max") s.red.p_max = x[i];
    else if (n == "q_min") s.red.q_min = x[i];
    else if (n == "q_max") s.red.q_max = x[i];
    else if (n == "w_q") {
      s.red.w_q = x[i];
      s.w_q_auto = false;
    } else if (n == "C") s.capacity = x[i];
    else if (n == "T_p") s.prop_delay = x[i] / 2.0;
    else if (n == "n_flows") s.n_flows = static_cast<int>(std::lround(x[i]));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<Point> sample_plan(const ParameterBox& box, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw DomainError("sample_plan: n must be >= 2");
  const std::size_t d = box.size();
  std::vector<Point> pts(n, Point(d));
  for (std::size_t j = 0; j < d; ++j) {
    RandomStream rng = RandomStream::substream(seed, j);
    std::vector<std::size_t> bins(n);
    std::iota(bins.begin(), bins.end(), 0);
    shuffle(bins, rng);
    const auto& dim = box.dims()[j];
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (static_cast<double>(bins[i]) + rng.uniform()) / static_cast<double>(n);
      pts[i][j] = dim.lower + u * (dim.upper - dim.lower);
    }
  }
  return pts;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<double> Dataset::response_column(std::size_t j) const {
  std::vector<double> out;
  out.reserve(responses.size());
  for (const auto& r : responses) out.push_back(r.at(j));
  return out;
}

Evaluator moment_equilibrium_evaluator() {
  Evaluator e;
  e.name = "moments";
  e.responses = {"Q_star", "W_star"};
  e.stochastic = false;
  e.run = [](const Scenario& s, std::uint64_t) {
    const auto eq = moments::fixed_point(s.fluid_params());
    return std::vector<double>{eq.Q, eq.W};
  };
  return e;
}

Evaluator des_evaluator(double duration, double cutoff_fraction) {
  Evaluator e;
  e.name = "des";
  e.responses = {"mean_q", "drop_fraction", "throughput"};
  e.stochastic = true;
  e.run = [duration, cutoff_fraction](const Scenario& s, std::uint64_t seed) {
    auto cfg = s.des_config(duration, seed, 0.1);
    cfg.record_event_log = false;
    const auto r = des::simulate_dumbbell(cfg);
    return std::vector<double>{time_average(r.series, "q", cutoff_fraction * duration),
                               r.summary.drop_fraction, r.summary.throughput};
  };
  return e;
}

Evaluator fluid_evaluator(double duration, double dt, std::size_t n_paths, double cutoff_fraction) {
  Evaluator e;
  e.name = "fluid";
  e.responses = {"mean_W", "mean_Q"};
  e.stochastic = true;
  e.run = [=](const Scenario& s, std::uint64_t seed) {
    fluid::EnsembleOptions opt;
    opt.t_end = duration;
    opt.dt = dt;
    opt.n_paths = n_paths;
    opt.seed = seed;
    const auto r = fluid::simulate_paths(s.fluid_params(), fluid::FluidState{}, opt);
    const double from = cutoff_fraction * duration;
    return std::vector<double>{time_average(r.stats, "W_mean", from), time_average(r.stats, "Q_mean", from)};
  };
  return e;
}

Dataset evaluate_design(const ParameterBox& box, const std::vector<Point>& points,
                        const Evaluator& evaluator, std::size_t replications, std::uint64_t seed) {
  if (replications < 1) throw DomainError("evaluate_design: replications must be >= 1");
  Dataset ds;
  ds.dim_names = box.names();
  ds.response_names = evaluator.responses;
  const std::size_t reps = evaluator.stochastic ? replications : 1;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& x = points[i];
    if (!box.contains(x)) throw DomainError("evaluate_design: point " + std::to_string(i) + " lies outside the box");
    const std::uint64_t row_seed = substream_seed(seed, i);
    try {
      const Scenario scenario = box.apply(x);
      std::vector<std::vector<double>> samples;
      for (std::size_t r = 0; r < reps; ++r) {
        auto out = evaluator.run(scenario, substream_seed(row_seed, r));
        if (out.size() != evaluator.responses.size()) throw DataError("evaluator returned the wrong number of responses");
        samples.push_back(std::move(out));
      }
      const std::size_t m = evaluator.responses.size();
      std::vector<double> mean(m, 0.0);
      std::vector<double> sd(m, 0.0);
      for (const auto& s : samples) {
        for (std::size_t j = 0; j < m; ++j) mean[j] += s[j];
      }
      for (double& v : mean) v /= static_cast<double>(reps);
      if (reps > 1) {
        for (const auto& s : samples) {
          for (std::size_t j = 0; j < m; ++j) sd[j] += (s[j] - mean[j]) * (s[j] - mean[j]);
        }
        for (double& v : sd) v = std::sqrt(v / static_cast<double>(reps - 1));
      }
      for (double v : mean) {
        if (!std::isfinite(v)) throw DataError("non-finite response");
      }
      ds.points.push_back(x);
      ds.responses.push_back(std::move(mean));
      ds.response_sd.push_back(std::move(sd));
      ds.provenance.push_back(evaluator.name + " seed=" + std::to_string(row_seed) +
                              " reps=" + std::to_string(reps));
    } catch (const std::exception& ex) {
      ds.failures.push_back({x, ex.what()});
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Fitting

std::string_view to_string(Kind kind) noexcept {
  switch (kind) {
    case Kind::Polynomial2: return "polynomial2";
    case Kind::RbfGaussian: return "rbf_gaussian";
  }
  return "unknown";
}

Kind kind_from_string(std::string_view text) {
  if (text == "polynomial2" || text == "poly2") return Kind::Polynomial2;
  if (text == "rbf_gaussian" || text == "rbf") return Kind::RbfGaussian;
  throw DomainError("unknown surrogate kind '" + std::string(text) + "'");
}

std::vector<std::string> polynomial_terms(const std::vector<std::string>& names) {
  std::vector<std::string> terms{"1"};
  for (const auto& n : names) terms.push_back(n);
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = i; j < names.size(); ++j) terms.push_back(names[i] + "*" + names[j]);
  }
  return terms;
}

namespace {

constexpr double kRidge = 1e-10;

Eigen::RowVectorXd poly_basis(const Point& u) {
  const std::size_t d = u.size();
  const std::size_t m = 1 + d + d * (d + 1) / 2;
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(m));
  Eigen::Index k = 0;
  row(k++) = 1.0;
  for (double v : u) row(k++) = v;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) row(k++) = u[i] * u[j];
  }
  return row;
}

double value_range(const std::vector<double>& y) {
  auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  return *mx - *mn;
}

double residual_scale(const std::vector<double>& y) {
  double s = value_range(y);
  for (double v : y) s = std::max(s, std::abs(v));
  return s > 0.0 ? s : 1.0;
}

Eigen::MatrixXd normalized_points(const ParameterBox& box, const Dataset& data) {
  const auto n = static_cast<Eigen::Index>(data.rows());
  const auto d = static_cast<Eigen::Index>(box.size());
  Eigen::MatrixXd U(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point u = box.normalize(data.points[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < d; ++j) U(i, j) = u[static_cast<std::size_t>(j)];
  }
  return U;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd D(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < B.rows(); ++j) D(i, j) = (A.row(i) - B.row(j)).squaredNorm();
  }
  return D;
}

std::vector<ResponseModel> fit_polynomial(const ParameterBox& box, const Dataset& data) {
  const auto terms = polynomial_terms(box.names());
  const auto m = static_cast<Eigen::Index>(terms.size());
  const auto n = static_cast<Eigen::Index>(data.rows());
  if (n < m) {
    throw DomainError("fit: polynomial2 needs at least " + std::to_string(m) + " rows, got " + std::to_string(n));
  }
  Eigen::MatrixXd X(n, m);
  for (Eigen::Index i = 0; i < n; ++i) X.row(i) = poly_basis(box.normalize(data.points[static_cast<std::size_t>(i)]));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < m) {
    std::string names;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < m; ++k) {
      if (!names.empty()) names += ", ";
      names += terms[static_cast<std::size_t>(perm(k))];
    }
    throw DomainError("fit: rank-deficient quadratic basis; deficient terms: " + names);
  }
  std::vector<ResponseModel> out;
  for (std::size_t j = 0; j < data.response_names.size(); ++j) {
    const auto y = data.response_column(j);
    const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    ResponseModel rm;
    rm.name = data.response_names[j];
    rm.coefficients = qr.solve(yv);
    rm.training_residual = (X * rm.coefficients - yv).cwiseAbs().maxCoeff() / residual_scale(y);
    rm.r2_defined = value_range(y) > 0.0;
    out.push_back(std::move(rm));
  }
  return out;
}

struct RbfSolve {
  Eigen::VectorXd weights;
  double loo_sse = 0.0;
};

RbfSolve solve_rbf(const Eigen::MatrixXd& D2, const Eigen::VectorXd& centered, double shape) {
  const auto n = D2.rows();
  Eigen::MatrixXd A = (-(shape * shape) * D2).array().exp().matrix();
  A.diagonal().array() += kRidge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  const Eigen::MatrixXd Ainv = ldlt.solve(Eigen::MatrixXd::Identity(n, n));
  RbfSolve s;
  s.weights = Ainv * centered;
  s.loo_sse = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = s.weights(i) / Ainv(i, i);
    s.loo_sse += e * e;
  }
  if (!std::isfinite(s.loo_sse)) s.loo_sse = std::numeric_limits<double>::infinity();
  return s;
}

std::vector<double> shape_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 36; ++i) g.push_back(std::pow(10.0, -1.0 + 3.0 * i / 36.0));
  return g;
}

std::vector<ResponseModel> fit_rbf(const ParameterBox& box, const Dataset& data) {
  const auto n = static_cast<Eigen::Index>(data.rows());
  if (n < 2) throw DomainError("fit: rbf_gaussian needs at least 2 rows");
  const Eigen::MatrixXd U = normalized_points(box, data);
  const Eigen::MatrixXd D2 = squared_distances(U, U);
  std::vector<ResponseModel> out;
  for (std::size_t j = 0; j < data.response_names.size(); ++j) {
    const auto y = data.response_column(j);
    const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    ResponseModel rm;
    rm.name = data.response_names[j];
    rm.centers = U;
    rm.offset = yv.mean();
    const Eigen::VectorXd centered = yv.array() - rm.offset;
    RbfSolve best;
    best.loo_sse = std::numeric_limits<double>::infinity();
    double best_shape = 1.0;
    for (double shape : shape_grid()) {
      RbfSolve s = solve_rbf(D2, centered, shape);
      if (s.loo_sse < best.loo_sse) {
        best = std::move(s);
        best_shape = shape;
      }
    }
    if (!std::isfinite(best.loo_sse)) best = solve_rbf(D2, centered, best_shape);
    rm.shape = best_shape;
    rm.coefficients = best.weights;
    const Eigen::MatrixXd K = (-(best_shape * best_shape) * D2).array().exp().matrix();
    const Eigen::VectorXd fitted = (K * rm.coefficients).array() + rm.offset;
    rm.training_residual = (fitted - yv).cwiseAbs().maxCoeff() / residual_scale(y);
    rm.r2_defined = value_range(y) > 0.0;
    out.push_back(std::move(rm));
  }
  return out;
}

double predict_one(const SurrogateModel& model, const ResponseModel& rm, const Point& u) {
  switch (model.kind) {
    case Kind::Polynomial2: return poly_basis(u).dot(rm.coefficients);
    case Kind::RbfGaussian: {
      double v = rm.offset;
      for (Eigen::Index i = 0; i < rm.centers.rows(); ++i) {
        double d2 = 0.0;
        for (Eigen::Index k = 0; k < rm.centers.cols(); ++k) {
          const double diff = u[static_cast<std::size_t>(k)] - rm.centers(i, k);
          d2 += diff * diff;
        }
        v += rm.coefficients(i) * std::exp(-(rm.shape * rm.shape) * d2);
      }
      return v;
    }
  }
  return 0.0;
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows) {
  Dataset s;
  s.dim_names = data.dim_names;
  s.response_names = data.response_names;
  for (auto r : rows) {
    s.points.push_back(data.points[r]);
    s.responses.push_back(data.responses[r]);
    if (r < data.response_sd.size()) s.response_sd.push_back(data.response_sd[r]);
    if (r < data.provenance.size()) s.provenance.push_back(data.provenance[r]);
  }
  return s;
}

struct CrossValidation {
  std::vector<std::vector<double>> predictions;  // per row
  std::vector<std::size_t> canonical;             // rows in canonical order, for order-free sums
  std::size_t largest_fold = 0;
};

CrossValidation cross_validate(const ParameterBox& box, const Dataset& data, Kind kind, std::size_t k,
                               std::uint64_t seed) {
  const std::size_t n = data.rows();
  if (k < 2 || k > n) {
    throw DomainError("assess: k must lie in [2, " + std::to_string(n) + "], got " + std::to_string(k));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (data.points[a] != data.points[b]) return data.points[a] < data.points[b];
    return data.responses[a] < data.responses[b];
  });
  CrossValidation cv;
  cv.canonical = order;
  RandomStream rng = RandomStream::substream(seed, 0xC0FFEE);
  shuffle(order, rng);

  cv.predictions.assign(n, {});
  for (std::size_t fold = 0; fold < k; ++fold) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> hold;
    for (std::size_t pos = 0; pos < n; ++pos) (pos % k == fold ? hold : train).push_back(order[pos]);
    cv.largest_fold = std::max(cv.largest_fold, hold.size());
    const SurrogateModel m = fit(box, subset(data, train), kind);
    for (auto r : hold) cv.predictions[r] = predict(m, data.points[r]).values;
  }
  return cv;
}

}  // namespace

SurrogateModel fit(const ParameterBox& box, const Dataset& data, Kind kind) {
  if (data.points.size() != data.responses.size()) throw DataError("fit: points/responses size mismatch");
  if (data.dim_names != box.names()) throw DataError("fit: dataset dimensions do not match the box");
  for (const auto& p : data.points) {
    if (!box.contains(p)) throw DataError("fit: dataset point outside the box");
  }
  SurrogateModel m{kind, box, {}, std::nullopt};
  m.responses = kind == Kind::Polynomial2 ? fit_polynomial(box, data) : fit_rbf(box, data);
  return m;
}

Prediction predict(const SurrogateModel& model, const Point& x) {
  if (x.size() != model.box.size()) {
    throw DomainError("predict: point has " + std::to_string(x.size()) + " coordinates, model expects " +
                      std::to_string(model.box.size()));
  }
  Prediction p;
  p.extrapolated = !model.box.contains(x);
  const Point u = model.box.normalize(x);
  for (const auto& rm : model.responses) p.values.push_back(predict_one(model, rm, u));
  return p;
}

AccuracyReport assess(const ParameterBox& box, const Dataset& data, Kind kind, std::size_t k,
                      std::uint64_t seed) {
  const CrossValidation cv = cross_validate(box, data, kind, k, seed);
  AccuracyReport rep;
  rep.k = k;
  rep.holdout_size = cv.largest_fold;
  const double n = static_cast<double>(data.rows());
  for (std::size_t j = 0; j < data.response_names.size(); ++j) {
    const auto y = data.response_column(j);
    double mean = 0.0;
    for (auto i : cv.canonical) mean += y[i];
    mean /= n;
    double sse = 0.0;
    double sst = 0.0;
    for (auto i : cv.canonical) {
      const double e = cv.predictions[i][j] - y[i];
      sse += e * e;
      sst += (y[i] - mean) * (y[i] - mean);
    }
    ResponseAccuracy ra;
    ra.name = data.response_names[j];
    ra.rmse = std::sqrt(sse / n);
    const double range = value_range(y);
    ra.relative_rmse = range > 0.0 ? ra.rmse / range : (ra.rmse == 0.0 ? 0.0 : INFINITY);
    ra.r2_defined = sst > 0.0;
    ra.r2 = ra.r2_defined ? 1.0 - sse / sst : std::nan("");
    rep.responses.push_back(ra);
  }
  return rep;
}

std::vector<Point> refinement_points(const ParameterBox& box, const Dataset& data, Kind kind,
                                     std::size_t k, std::size_t m, std::uint64_t seed) {
  const CrossValidation cv = cross_validate(box, data, kind, k, seed);
  const std::size_t n = data.rows();
  std::vector<double> score(n, 0.0);
  for (std::size_t j = 0; j < data.response_names.size(); ++j) {
    const auto y = data.response_column(j);
    const double range = value_range(y) > 0.0 ? value_range(y) : 1.0;
    for (std::size_t i = 0; i < n; ++i) score[i] = std::max(score[i], std::abs(cv.predictions[i][j] - y[i]) / range);
  }
  std::vector<std::size_t> rank(n);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

  const Eigen::MatrixXd U = normalized_points(box, data);
  std::vector<Point> out;
  for (std::size_t r = 0; r < std::min(m, n); ++r) {
    const std::size_t i = rank[r];
    std::size_t nearest = i;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = (U.row(static_cast<Eigen::Index>(i)) - U.row(static_cast<Eigen::Index>(j))).squaredNorm();
      if (d < best) {
        best = d;
        nearest = j;
      }
    }
    Point mid(box.size());
    for (std::size_t c = 0; c < box.size(); ++c) mid[c] = 0.5 * (data.points[i][c] + data.points[nearest][c]);
    out.push_back(std::move(mid));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

ordered_json scenario_json(const Scenario& s) {
  ordered_json j;
  j["q_min"] = s.red.q_min;
  j["q_max"] = s.red.q_max;
  j["p_max"] = s.red.p_max;
  j["w_q"] = s.red.w_q;
  j["w_q_auto"] = s.w_q_auto;
  j["capacity"] = s.capacity;
  j["prop_delay"] = s.prop_delay;
  j["n_flows"] = s.n_flows;
  j["buffer"] = s.buffer;
  return j;
}

Scenario scenario_from(const nlohmann::json& j) {
  Scenario s;
  s.red.q_min = j.at("q_min").get<double>();
  s.red.q_max = j.at("q_max").get<double>();
  s.red.p_max = j.at("p_max").get<double>();
  s.red.w_q = j.at("w_q").get<double>();
  s.w_q_auto = j.at("w_q_auto").get<bool>();
  s.capacity = j.at("capacity").get<double>();
  s.prop_delay = j.at("prop_delay").get<double>();
  s.n_flows = j.at("n_flows").get<int>();
  s.buffer = j.at("buffer").get<std::uint64_t>();
  return s;
}

ordered_json box_json(const ParameterBox& box) {
  ordered_json j;
  ordered_json dims = ordered_json::array();
  for (const auto& d : box.dims()) dims.push_back({{"name", d.name}, {"lower", d.lower}, {"upper", d.upper}});
  j["dims"] = dims;
  j["base"] = scenario_json(box.base());
  return j;
}

ParameterBox box_from(const nlohmann::json& j) {
  std::vector<Dimension> dims;
  for (const auto& d : j.at("dims")) {
    dims.push_back({d.at("name").get<std::string>(), d.at("lower").get<double>(), d.at("upper").get<double>()});
  }
  return ParameterBox(std::move(dims), scenario_from(j.at("base")));
}

ordered_json report_json(const AccuracyReport& r) {
  ordered_json j;
  j["k"] = r.k;
  j["holdout_size"] = r.holdout_size;
  ordered_json rs = ordered_json::array();
  for (const auto& a : r.responses) {
    ordered_json e;
    e["name"] = a.name;
    e["rmse"] = a.rmse;
    e["relative_rmse"] = std::isfinite(a.relative_rmse) ? ordered_json(a.relative_rmse) : ordered_json(nullptr);
    e["r2"] = a.r2_defined ? ordered_json(a.r2) : ordered_json(nullptr);
    e["r2_defined"] = a.r2_defined;
    rs.push_back(e);
  }
  j["responses"] = rs;
  return j;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string f;
  std::istringstream is(line);
  while (std::getline(is, f, ',')) out.push_back(f);
  return out;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw DataError("bad number '" + s + "'");
  }
  if (pos != s.size()) throw DataError("bad number '" + s + "'");
  return v;
}

}  // namespace

std::string box_to_json(const ParameterBox& box) { return box_json(box).dump(2); }

ParameterBox box_from_json(const std::string& text) { return box_from(nlohmann::json::parse(text)); }

void write_plan_csv(std::ostream& os, const ParameterBox& box, const std::vector<Point>& points) {
  const auto names = box.names();
  for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
  os << '\n';
  for (const auto& p : points) {
    for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << format_number(p[i]);
    os << '\n';
  }
}

std::vector<Point> read_plan_csv(std::istream& is, const ParameterBox& box) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("plan CSV: missing header");
  if (split(line) != box.names()) throw DataError("plan CSV: header does not match the box dimensions");
  std::vector<Point> pts;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != box.size()) throw DataError("plan CSV: wrong field count");
    Point p;
    for (const auto& s : f) p.push_back(to_double(s));
    pts.push_back(std::move(p));
  }
  return pts;
}

void write_dataset(const std::string& csv_path, const std::string& json_path, const ParameterBox& box,
                   const Dataset& data, const std::string& evaluator, std::uint64_t seed,
                   std::size_t replications) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot open '" + csv_path + "' for writing");
  std::vector<std::string> header = data.dim_names;
  for (const auto& r : data.response_names) header.push_back(r);
  for (const auto& r : data.response_names) header.push_back(r + "_sd");
  header.emplace_back("provenance");
  for (std::size_t i = 0; i < header.size(); ++i) csv << (i ? "," : "") << header[i];
  csv << '\n';
  for (std::size_t r = 0; r < data.rows(); ++r) {
    bool first = true;
    auto put = [&](const std::string& s) {
      csv << (first ? "" : ",") << s;
      first = false;
    };
    for (double v : data.points[r]) put(format_number(v));
    for (double v : data.responses[r]) put(format_number(v));
    for (std::size_t j = 0; j < data.response_names.size(); ++j) {
      put(format_number(r < data.response_sd.size() ? data.response_sd[r][j] : 0.0));
    }
    put(r < data.provenance.size() ? data.provenance[r] : std::string());
    csv << '\n';
  }

  ordered_json j;
  j["box"] = box_json(box);
  j["evaluator"] = evaluator;
  j["seed"] = seed;
  j["replications"] = replications;
  j["response_names"] = data.response_names;
  ordered_json failures = ordered_json::array();
  for (const auto& f : data.failures) failures.push_back({{"point", f.point}, {"reason", f.reason}});
  j["failures"] = failures;
  std::ofstream js(json_path, std::ios::binary);
  if (!js) throw std::runtime_error("cannot open '" + json_path + "' for writing");
  js << j.dump(2) << '\n';
}

LoadedDataset read_dataset(const std::string& csv_path, const std::string& json_path) {
  std::ifstream js(json_path, std::ios::binary);
  if (!js) throw DataError("cannot open '" + json_path + "'");
  const auto j = nlohmann::json::parse(js);
  ParameterBox box = box_from(j.at("box"));
  Dataset ds;
  ds.dim_names = box.names();
  ds.response_names = j.at("response_names").get<std::vector<std::string>>();
  for (const auto& f : j.at("failures")) {
    ds.failures.push_back({f.at("point").get<Point>(), f.at("reason").get<std::string>()});
  }

  std::ifstream csv(csv_path, std::ios::binary);
  if (!csv) throw DataError("cannot open '" + csv_path + "'");
  std::string line;
  if (!std::getline(csv, line)) throw DataError("dataset CSV: missing header");
  const std::size_t d = ds.dim_names.size();
  const std::size_t m = ds.response_names.size();
  if (split(line).size() != d + 2 * m + 1) throw DataError("dataset CSV: header does not match the sidecar");
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() == d + 2 * m) f.emplace_back();
    if (f.size() != d + 2 * m + 1) throw DataError("dataset CSV: wrong field count");
    Point p;
    std::vector<double> y;
    std::vector<double> sd;
    for (std::size_t i = 0; i < d; ++i) p.push_back(to_double(f[i]));
    for (std::size_t i = 0; i < m; ++i) y.push_back(to_double(f[d + i]));
    for (std::size_t i = 0; i < m; ++i) sd.push_back(to_double(f[d + m + i]));
    ds.points.push_back(std::move(p));
    ds.responses.push_back(std::move(y));
    ds.response_sd.push_back(std::move(sd));
    ds.provenance.push_back(f.back());
  }
  return {std::move(box), std::move(ds)};
}

std::string model_to_json(const SurrogateModel& model) {
  ordered_json j;
  j["kind"] = std::string(to_string(model.kind));
  j["box"] = box_json(model.box);
  if (model.kind == Kind::Polynomial2) j["terms"] = polynomial_terms(model.box.names());
  ordered_json rs = ordered_json::array();
  for (const auto& r : model.responses) {
    ordered_json e;
    e["name"] = r.name;
    e["coefficients"] = std::vector<double>(r.coefficients.data(), r.coefficients.data() + r.coefficients.size());
    if (model.kind == Kind::RbfGaussian) {
      ordered_json centers = ordered_json::array();
      for (Eigen::Index i = 0; i < r.centers.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(r.centers.cols()));
        for (Eigen::Index k = 0; k < r.centers.cols(); ++k) row[static_cast<std::size_t>(k)] = r.centers(i, k);
        centers.push_back(row);
      }
      e["centers"] = centers;
      e["shape"] = r.shape;
      e["offset"] = r.offset;
    }
    e["training_residual"] = r.training_residual;
    e["r2_defined"] = r.r2_defined;
    rs.push_back(e);
  }
  j["responses"] = rs;
  if (model.accuracy) j["accuracy"] = report_json(*model.accuracy);
  return j.dump(2);
}

SurrogateModel model_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SurrogateModel m{kind_from_string(j.at("kind").get<std::string>()), box_from(j.at("box")), {}, std::nullopt};
  for (const auto& e : j.at("responses")) {
    ResponseModel r;
    r.name = e.at("name").get<std::string>();
    const auto c = e.at("coefficients").get<std::vector<double>>();
    r.coefficients = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    if (m.kind == Kind::RbfGaussian) {
      const auto centers = e.at("centers").get<std::vector<std::vector<double>>>();
      r.centers.resize(static_cast<Eigen::Index>(centers.size()), static_cast<Eigen::Index>(m.box.size()));
      for (std::size_t i = 0; i < centers.size(); ++i) {
        for (std::size_t k = 0; k < m.box.size(); ++k) {
          r.centers(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = centers[i].at(k);
        }
      }
      r.shape = e.at("shape").get<double>();
      r.offset = e.at("offset").get<double>();
    }
    r.training_residual = e.at("training_residual").get<double>();
    r.r2_defined = e.at("r2_defined").get<bool>();
    m.responses.push_back(std::move(r));
  }
  if (j.contains("accuracy")) {
    AccuracyReport a;
    const auto& ja = j.at("accuracy");
    a.k = ja.at("k").get<std::size_t>();
    a.holdout_size = ja.at("holdout_size").get<std::size_t>();
    for (const auto& e : ja.at("responses")) {
      ResponseAccuracy ra;
      ra.name = e.at("name").get<std::string>();
      ra.rmse = e.at("rmse").get<double>();
      ra.relative_rmse = e.at("relative_rmse").is_null() ? INFINITY : e.at("relative_rmse").get<double>();
      ra.r2_defined = e.at("r2_defined").get<bool>();
      ra.r2 = ra.r2_defined ? e.at("r2").get<double>() : std::nan("");
      a.responses.push_back(ra);
    }
    m.accuracy = a;
  }
  return m;
}

std::string report_to_json(const AccuracyReport& report) { return report_json(report).dump(2); }

}  // namespace redsim::surrogate
