#include "redsim/red.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "redsim/errors.hpp"

namespace redsim {

std::vector<std::string> RedParams::violations() const {
  std::vector<std::string> out;
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(q_min) || !finite(q_max) || !finite(p_max) || !finite(w_q)) {
    out.emplace_back("red: all parameters must be finite");
    return out;
  }
  if (q_min < 0.0) out.emplace_back("red.q_min must be >= 0");
  if (!(q_min < q_max)) {
    std::ostringstream os;
    os << "red.q_min (" << q_min << ") must be < red.q_max (" << q_max << ")";
    out.push_back(os.str());
  }
  if (!(p_max > 0.0 && p_max <= 1.0)) out.emplace_back("red.p_max must lie in (0, 1]");
  if (!(w_q > 0.0 && w_q < 1.0)) out.emplace_back("red.w_q must lie in (0, 1)");
  return out;
}

void RedParams::validate() const {
  auto v = violations();
  if (!v.empty()) throw ConfigError(std::move(v));
}

double ewma_weight(double capacity) {
  if (!std::isfinite(capacity) || capacity <= 0.0) {
    throw DomainError("ewma_weight: capacity must be finite and > 0");
  }
  // -expm1(-x) keeps full precision for large capacities where w_q ~ 1/C.
  return -std::expm1(-1.0 / capacity);
}

double ewma_update(double q_hat, double q, double w_q) {
  if (!(w_q > 0.0 && w_q < 1.0)) throw DomainError("ewma_update: w_q must lie in (0, 1)");
  if (!std::isfinite(q_hat) || !std::isfinite(q) || q_hat < 0.0 || q < 0.0) {
    throw DomainError("ewma_update: queue lengths must be finite and >= 0");
  }
  const double next = (1.0 - w_q) * q_hat + w_q * q;
  // Clamp away rounding that could leave the interval spanned by the inputs.
  const double lo = std::min(q_hat, q);
  const double hi = std::max(q_hat, q);
  return std::clamp(next, lo, hi);
}

double drop_probability(double q_hat, const RedParams& params) noexcept {
  if (q_hat <= params.q_min) return 0.0;
  if (q_hat <= params.q_max) {
    return (q_hat - params.q_min) / (params.q_max - params.q_min) * params.p_max;
  }
  return 1.0;
}

bool drop_decision(double p, RandomStream& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("drop_decision: p must lie in [0, 1]");
  const double u = rng.uniform();
  return u < p;
}

}  // namespace redsim
