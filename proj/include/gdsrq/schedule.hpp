#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace gdsrq {

/// Power-law stepsizes alpha_k = alpha0 (k+1)^-la, beta_k = beta0 (k+1)^-lb
/// and time-average weights proportional to (t+1)^-lg. Index origin is k = 0.
struct Schedule {
  double alpha0 = 1.0;
  double lambda_alpha = 1.0;
  double beta0 = 1.0;
  double lambda_beta = 0.6;
  double lambda_gamma = 1.0;
};

inline double stepsize_alpha(const Schedule& s, std::uint64_t k) {
  return s.alpha0 * std::pow(static_cast<double>(k) + 1.0, -s.lambda_alpha);
}

inline double stepsize_beta(const Schedule& s, std::uint64_t k) {
  return s.beta0 * std::pow(static_cast<double>(k) + 1.0, -s.lambda_beta);
}

/// Unnormalized time-average weight of iterate t.
inline double time_weight(const Schedule& s, std::uint64_t t) {
  return std::pow(static_cast<double>(t) + 1.0, -s.lambda_gamma);
}

struct ConditionResult {
  std::string name;
  std::string inequality;  // instantiated with the actual numbers
  bool passed = false;
};

struct ValidationReport {
  std::vector<ConditionResult> conditions;

  bool passed() const {
    for (const auto& c : conditions)
      if (!c.passed) return false;
    return true;
  }

  std::vector<std::string> failed_names() const {
    std::vector<std::string> out;
    for (const auto& c : conditions)
      if (!c.passed) out.push_back(c.name);
    return out;
  }

  const ConditionResult* find(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return &c;
    return nullptr;
  }

  void add(std::string name, bool ok, std::string inequality) {
    conditions.push_back({std::move(name), std::move(inequality), ok});
  }

  void append(const ValidationReport& other) {
    conditions.insert(conditions.end(), other.conditions.begin(), other.conditions.end());
  }
};

inline std::ostream& operator<<(std::ostream& os, const ValidationReport& r) {
  std::size_t width = 0;
  for (const auto& c : r.conditions) width = std::max(width, c.name.size());
  for (const auto& c : r.conditions) {
    os << (c.passed ? "  PASS  " : "  FAIL  ") << c.name
       << std::string(width - c.name.size() + 2, ' ') << c.inequality << '\n';
  }
  os << (r.passed() ? "all conditions hold\n" : "some conditions are violated\n");
  return os;
}

namespace detail {
inline std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}
}  // namespace detail

/// Checks the stepsize hypotheses for power-law schedules. Series conditions
/// are decided symbolically from the exponents.
inline ValidationReport validate_schedule(const Schedule& s, double mu, double sigma2) {
  using detail::num;
  const double la = s.lambda_alpha, lb = s.lambda_beta, lg = s.lambda_gamma;
  ValidationReport r;
  r.add("alpha0_positive", s.alpha0 > 0.0, "alpha0 = " + num(s.alpha0) + " > 0");
  r.add("beta0_range", s.beta0 > 0.0 && s.beta0 <= 1.0, "0 < beta0 = " + num(s.beta0) + " <= 1");
  r.add("sum_beta_diverges", lb <= 1.0, "sum beta_k = inf  <=>  lambda_beta = " + num(lb) + " <= 1");
  r.add("sum_beta_sq_converges", lb > 0.5,
        "sum beta_k^2 < inf  <=>  lambda_beta = " + num(lb) + " > 1/2");
  r.add("sum_alpha_sq_over_beta_converges", 2.0 * la - lb > 1.0,
        "sum alpha_k^2/beta_k < inf  <=>  2*lambda_alpha - lambda_beta = " + num(2.0 * la - lb) +
            " > 1");
  r.add("sum_alpha_diverges", la <= 1.0,
        "sum alpha_k = inf  <=>  lambda_alpha = " + num(la) + " <= 1");
  r.add("k_beta_unbounded", lb < 1.0, "lim k*beta_k = inf  <=>  lambda_beta = " + num(lb) + " < 1");
  r.add("inv_k_alpha_bounded", la <= 1.0,
        "lim 1/(k*alpha_k) <= C  <=>  lambda_alpha = " + num(la) + " <= 1");
  r.add("lambda_alpha_range", la > 0.5 && la <= 1.0, "1/2 < lambda_alpha = " + num(la) + " <= 1");
  r.add("lambda_beta_range", lb > 0.5 && lb < 1.0, "1/2 < lambda_beta = " + num(lb) + " < 1");
  r.add("two_lambda_beta_gt_lambda_alpha", 2.0 * lb > la,
        "2*lambda_beta = " + num(2.0 * lb) + " > lambda_alpha = " + num(la));
  r.add("lambda_gamma_range", la <= lg && lg <= 1.0,
        "lambda_alpha = " + num(la) + " <= lambda_gamma = " + num(lg) + " <= 1");
  r.add("spectral_gap_beta0", (1.0 - sigma2) * s.beta0 < 1.0,
        "(1 - sigma2) * beta0 = (1 - " + num(sigma2) + ") * " + num(s.beta0) + " = " +
            num((1.0 - sigma2) * s.beta0) + " < 1");
  r.add("alpha0_mu", s.alpha0 * mu < 1.0,
        "alpha0 * mu = " + num(s.alpha0) + " * " + num(mu) + " = " + num(s.alpha0 * mu) + " < 1");
  return r;
}

}  // namespace gdsrq
