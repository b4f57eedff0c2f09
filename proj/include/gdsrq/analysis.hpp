#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gdsrq/objectives.hpp"
#include "gdsrq/random.hpp"
#include "gdsrq/schedule.hpp"

namespace gdsrq {

// --- trajectories -----------------------------------------------------------

struct TrajectoryRecord {
  std::uint64_t k = 0;
  double r_k = 0.0;           // |xbar_k - x*|^2
  double consensus_sq = 0.0;  // |Y_k|_F^2
  double gap_z = 0.0;         // mean_i f(z_{i,k}) - f*
  double gap_xbar = 0.0;      // f(xbar_k) - f*

  bool operator==(const TrajectoryRecord&) const = default;
};

struct RunTrajectory {
  std::vector<TrajectoryRecord> records;
  std::string fingerprint;
  std::uint64_t seed = 0;
  /// Records whose gap was slightly negative (within solver tolerance).
  std::size_t negative_gap_flags = 0;

  /// (k, selected field) pairs, e.g. series(&TrajectoryRecord::gap_z).
  std::vector<std::pair<double, double>> series(double TrajectoryRecord::*field) const {
    std::vector<std::pair<double, double>> out;
    out.reserve(records.size());
    for (const auto& r : records) out.emplace_back(static_cast<double>(r.k), r.*field);
    return out;
  }
};

// --- metrics ----------------------------------------------------------------

/// Squared Frobenius norm of X - 1 xbar^T for an N x d iterate matrix whose
/// rows are agents. Accepts any container of rows indexable as rows[i][d].
template <class Rows>
double consensus_error(const Rows& rows) {
  const std::size_t n = std::size(rows);
  if (n == 0) throw std::invalid_argument("consensus_error: no agents");
  const std::size_t d = std::size(rows[0]);
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) mean[c] += rows[i][c];
  for (double& m : mean) m /= static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) {
      const double dev = rows[i][c] - mean[c];
      s += dev * dev;
    }
  return s;
}

inline double consensus_error(const Eigen::MatrixXd& x) {
  if (x.rows() == 0) throw std::invalid_argument("consensus_error: no agents");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  return (x.rowwise() - mean).squaredNorm();
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("squared_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

// --- reference optimum ------------------------------------------------------

struct ReferenceSolution {
  std::vector<double> x_star;
  double f_star = 0.0;
  double tol = 0.0;
  std::uint64_t iterations = 0;
  double residual = 0.0;  // |x* - P[x* - grad f(x*)]|
};

/// r_k = |xbar - x*|^2.
inline double optimality_gap(std::span<const double> xbar, const ReferenceSolution& ref) {
  return squared_distance(xbar, ref.x_star);
}

/// |x - P[x - eta * g]| with g = grad f(x).
inline double projected_gradient_residual(const ObjectiveSpec& spec, std::span<const double> x,
                                          double eta = 1.0) {
  std::vector<double> g(spec.dim), y(spec.dim);
  global_subgradient(spec, x, g);
  for (std::size_t d = 0; d < spec.dim; ++d) y[d] = x[d] - eta * g[d];
  project_box(y, spec.feasible_box);
  return std::sqrt(squared_distance(x, y));
}

namespace detail {

struct PgdResult {
  std::vector<double> x;
  double f = 0.0;
  std::uint64_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

// Projected gradient descent. The step is backtracked until it satisfies the
// local Lipschitz test |g(x+) - g(x)| <= |x+ - x| / eta, which, unlike a
// function-value test, does not stall on round-off near the optimum.
inline PgdResult projected_gradient_descent(const ObjectiveSpec& spec, std::vector<double> x,
                                            double tol, std::uint64_t max_iterations) {
  const std::size_t d = spec.dim;
  project_box(x, spec.feasible_box);
  std::vector<double> g(d), g_trial(d), trial(d);
  global_subgradient(spec, x, g);
  double eta = 1.0;
  PgdResult out;
  for (std::uint64_t it = 0; it < max_iterations; ++it) {
    out.residual = projected_gradient_residual(spec, x);
    if (out.residual <= tol) {
      out.converged = true;
      out.iterations = it;
      break;
    }
    eta = std::min(1e6, eta * 2.0);
    for (;;) {
      for (std::size_t c = 0; c < d; ++c)
        trial[c] = std::clamp(x[c] - eta * g[c], spec.feasible_box.lo, spec.feasible_box.hi);
      global_subgradient(spec, trial, g_trial);
      const double step = std::sqrt(squared_distance(trial, x));
      const double change = std::sqrt(squared_distance(g_trial, g));
      if (change * eta <= step || eta < 1e-14) break;
      eta *= 0.5;
    }
    x.swap(trial);
    g.swap(g_trial);
    out.iterations = it + 1;
  }
  out.x = std::move(x);
  out.f = global_value(spec, out.x);
  return out;
}

}  // namespace detail

/// Box-constrained minimizer of a convex objective by projected gradient
/// descent, run from two starts (box center and a fixed pseudo-random
/// point). Both must reach the fixed-point residual `tol` and agree in f to
/// within 10 * tol.
inline ReferenceSolution reference_optimum(const ObjectiveSpec& spec, double tol = 1e-10,
                                           std::uint64_t max_iterations = 1'000'000) {
  if (spec.convexity.kind == ConvexityClass::weakly_convex)
    throw std::invalid_argument("reference_optimum: objective must be convex");
  if (!(tol > 0.0)) throw std::invalid_argument("reference_optimum: tol must be > 0");
  const auto& box = spec.feasible_box;

  std::vector<double> center(spec.dim, 0.5 * (box.lo + box.hi));
  std::vector<double> other(spec.dim);
  CounterStream rng = make_stream(0x5eed, StreamDomain::test);
  for (double& v : other) v = box.lo + (box.hi - box.lo) * rng.uniform01();

  const auto first = detail::projected_gradient_descent(spec, center, tol, max_iterations);
  const auto second = detail::projected_gradient_descent(spec, other, tol, max_iterations);
  if (!first.converged || !second.converged)
    throw std::runtime_error("reference_optimum: projected gradient did not reach residual " +
                             detail::num(tol) + " within " + std::to_string(max_iterations) +
                             " iterations (residuals " + detail::num(first.residual) + ", " +
                             detail::num(second.residual) + ")");
  if (std::abs(first.f - second.f) > 10.0 * tol)
    throw std::runtime_error("reference_optimum: cross-check runs disagree in f by " +
                             detail::num(std::abs(first.f - second.f)));
  ReferenceSolution ref;
  ref.x_star = first.x;
  ref.f_star = first.f;
  ref.tol = tol;
  ref.iterations = first.iterations;
  ref.residual = first.residual;
  return ref;
}

// --- rates ------------------------------------------------------------------

/// chi = max(lb - la, 1 + la - 4 lb): the exponent of the O((k+1)^chi) bound
/// on E f(z_k) - f* for power-law schedules.
inline double predicted_rate(double lambda_alpha, double lambda_beta) {
  return std::max(lambda_beta - lambda_alpha, 1.0 + lambda_alpha - 4.0 * lambda_beta);
}

/// Whether (la, lb) lies in the range where predicted_rate applies.
inline bool rate_exponents_valid(double lambda_alpha, double lambda_beta) {
  return lambda_alpha > 0.5 && lambda_alpha <= 1.0 && lambda_beta > 0.5 && lambda_beta < 1.0 &&
         2.0 * lambda_beta > lambda_alpha;
}

/// la = (5/2) lb - 1/2, where both branches of predicted_rate coincide.
inline double optimal_lambda_alpha(double lambda_beta) {
  if (!(lambda_beta > 0.5 && lambda_beta <= 0.6))
    throw std::invalid_argument("optimal_lambda_alpha: requires 1/2 < lambda_beta <= 3/5, got " +
                                detail::num(lambda_beta));
  const double la = 2.5 * lambda_beta - 0.5;
  const double left = lambda_beta - la, right = 1.0 + la - 4.0 * lambda_beta;
  if (std::abs(left - right) > 1e-12)
    throw std::logic_error("optimal_lambda_alpha: rate branches do not coincide");
  return la;
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
  std::size_t dropped_nonpositive = 0;
};

/// Least-squares slope of log(value) against log(k + 1) over the last
/// `tail_fraction` of the series. Non-positive values are skipped and counted.
inline RateFit fit_empirical_rate(std::span<const std::pair<double, double>> series,
                                  double tail_fraction = 0.5) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw std::invalid_argument("fit_empirical_rate: tail_fraction must be in (0, 1]");
  const auto n = series.size();
  const auto tail = static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n)));
  RateFit fit;
  double sx = 0.0, sy = 0.0;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = n - tail; i < n; ++i) {
    const auto [k, v] = series[i];
    if (!(v > 0.0)) {
      ++fit.dropped_nonpositive;
      continue;
    }
    pts.emplace_back(std::log(k + 1.0), std::log(v));
    sx += pts.back().first;
    sy += pts.back().second;
  }
  fit.points = pts.size();
  if (pts.size() < 2) throw std::invalid_argument("fit_empirical_rate: fewer than two usable points");
  const double mx = sx / static_cast<double>(pts.size()), my = sy / static_cast<double>(pts.size());
  double sxx = 0.0, sxy = 0.0;
  for (auto [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_empirical_rate: degenerate abscissae");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

// --- product / series numerics ---------------------------------------------

struct ProductCheck {
  double final_product = 0.0;           // prod_{k<=K} (1 - delta x_k)
  double partial_sum_of_products = 0.0; // sum_{k<=K} prod_{t<=k} (1 - delta x_t)
};

/// Same check for an arbitrary sequence x_0..x_K. Factors are multiplied
/// directly; a product that underflows simply reaches 0.
inline ProductCheck product_decay_check(std::span<const double> x, double delta) {
  if (!(delta > 0.0 && delta <= 1.0))
    throw std::invalid_argument("product_decay_check: delta must be in (0, 1]");
  double product = 1.0, sum = 0.0;
  for (double xk : x) {
    product *= 1.0 - delta * xk;
    sum += product;
  }
  return {product, sum};
}

/// x_k = (k+1)^-exponent for k = 0..K.
inline ProductCheck product_decay_check(double exponent, double delta, std::uint64_t K) {
  if (!(exponent >= 0.0))
    throw std::invalid_argument("product_decay_check: exponent must be >= 0 so that x_k <= 1");
  std::vector<double> x(K + 1);
  for (std::uint64_t k = 0; k <= K; ++k) x[k] = std::pow(static_cast<double>(k) + 1.0, -exponent);
  return product_decay_check(x, delta);
}

// --- time-average weight conditions -----------------------------------------

struct WeightConditionRow {
  std::uint64_t K = 0;
  double weight_sum_error = 0.0;    // |sum_t gamma_K^t - 1|
  bool convex_chain = false;        // gamma^{t+1}/alpha_{t+1} <= gamma^t/alpha_t
  bool strong_chain = false;        // same with the (1 - mu alpha_{t+1}) factor
  double beta_sq_over_alpha = 0.0;  // sum_t gamma_K^t beta_t^2 / alpha_t
  double alpha_over_beta = 0.0;     // sum_t gamma_K^t alpha_t / beta_t
  double endpoint_difference = 0.0; // gamma^0/alpha_0 - gamma^K/alpha_K
  double total_variation = 0.0;     // sum_j |gamma^j/alpha_j - gamma^{j+1}/alpha_{j+1}|
};

struct WeightConditionReport {
  std::vector<WeightConditionRow> rows;
  ValidationReport checks;
  bool convex_set_holds = false;  // weight conditions of the convex result
  bool strong_set_holds = false;  // weight conditions of the strongly convex result
};

/// Materializes gamma_K^t for each K and checks the weight hypotheses. The
/// limits cannot be taken, so the two vanishing sums must strictly decrease
/// across the (increasing) K values.
inline WeightConditionReport weight_condition_check(const Schedule& s, double sigma2,
                                                             std::vector<std::uint64_t> K_values,
                                                             double mu = 0.0) {
  using detail::num;
  std::sort(K_values.begin(), K_values.end());
  K_values.erase(std::unique(K_values.begin(), K_values.end()), K_values.end());
  WeightConditionReport rep;
  constexpr double kChainTol = 1e-12;

  for (std::uint64_t K : K_values) {
    WeightConditionRow row;
    row.K = K;
    std::vector<double> gamma(K + 1);
    double norm = 0.0;
    for (std::uint64_t t = 0; t <= K; ++t) norm += time_weight(s, t);
    double wsum = 0.0;
    for (std::uint64_t t = 0; t <= K; ++t) {
      gamma[t] = time_weight(s, t) / norm;
      wsum += gamma[t];
    }
    row.weight_sum_error = std::abs(wsum - 1.0);
    row.convex_chain = true;
    row.strong_chain = true;
    for (std::uint64_t t = 0; t <= K; ++t) {
      const double a = stepsize_alpha(s, t), b = stepsize_beta(s, t);
      row.beta_sq_over_alpha += gamma[t] * b * b / a;
      row.alpha_over_beta += gamma[t] * a / b;
      if (t < K) {
        const double a_next = stepsize_alpha(s, t + 1);
        const double here = gamma[t] / a, next = gamma[t + 1] / a_next;
        const double slack = kChainTol * std::max(std::abs(here), std::abs(next));
        if (next > here + slack) row.convex_chain = false;
        if (next * (1.0 - mu * a_next) > here + slack) row.strong_chain = false;
        row.total_variation += std::abs(here - next);
      }
    }
    row.endpoint_difference = gamma[0] / stepsize_alpha(s, 0) - gamma[K] / stepsize_alpha(s, K);
    rep.rows.push_back(row);
  }

  auto& c = rep.checks;
  bool sums_ok = true, convex_chain = true, strong_chain = true;
  for (const auto& row : rep.rows) {
    sums_ok = sums_ok && row.weight_sum_error <= 1e-12;
    convex_chain = convex_chain && row.convex_chain;
    strong_chain = strong_chain && row.strong_chain;
  }
  c.add("weights_sum_to_one", sums_ok, "|sum_t gamma_K^t - 1| <= 1e-12 for every K");
  c.add("gamma_over_alpha_nonincreasing", convex_chain,
        "gamma_K^{t+1}/alpha_{t+1} <= gamma_K^t/alpha_t for all t < K");
  c.add("gamma_over_alpha_nonincreasing_strong", strong_chain,
        "gamma_K^{t+1}/alpha_{t+1} (1 - mu alpha_{t+1}) <= gamma_K^t/alpha_t, mu = " + num(mu));

  auto decreasing = [&](double WeightConditionRow::*field, bool strict) {
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
      const double prev = rep.rows[i - 1].*field, cur = rep.rows[i].*field;
      if (strict ? !(cur < prev) : !(cur <= prev + 1e-12)) return false;
    }
    return !rep.rows.empty();
  };
  auto trail = [&](double WeightConditionRow::*field) {
    std::string out;
    for (const auto& row : rep.rows) out += (out.empty() ? "" : " -> ") + num(row.*field);
    return out;
  };
  c.add("sum_gamma_beta_sq_over_alpha_vanishing",
        decreasing(&WeightConditionRow::beta_sq_over_alpha, true),
        "strictly decreasing over K: " + trail(&WeightConditionRow::beta_sq_over_alpha));
  c.add("sum_gamma_alpha_over_beta_vanishing",
        decreasing(&WeightConditionRow::alpha_over_beta, true),
        "strictly decreasing over K: " + trail(&WeightConditionRow::alpha_over_beta));
  c.add("endpoint_difference_vanishing",
        decreasing(&WeightConditionRow::endpoint_difference, false),
        "nonincreasing over K: " + trail(&WeightConditionRow::endpoint_difference));
  c.add("total_variation_vanishing", decreasing(&WeightConditionRow::total_variation, false),
        "nonincreasing over K: " + trail(&WeightConditionRow::total_variation));
  c.add("spectral_gap_beta0", (1.0 - sigma2) * s.beta0 < 1.0,
        "(1 - sigma2) * beta0 = " + num((1.0 - sigma2) * s.beta0) + " < 1");

  auto ok = [&](const char* name) { return c.find(name)->passed; };
  const bool common = ok("weights_sum_to_one") && ok("sum_gamma_beta_sq_over_alpha_vanishing") &&
                      ok("sum_gamma_alpha_over_beta_vanishing");
  rep.convex_set_holds =
      common && ok("gamma_over_alpha_nonincreasing") && ok("endpoint_difference_vanishing");
  rep.strong_set_holds =
      common && ok("gamma_over_alpha_nonincreasing_strong") && ok("total_variation_vanishing");
  return rep;
}

}  // namespace gdsrq
