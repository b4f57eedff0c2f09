#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <memory>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gdsrq/random.hpp"

namespace gdsrq {

enum class ConvexityClass { strongly_convex, convex, weakly_convex };

/// Convexity tag with its modulus: mu for strongly convex, rho for weakly
/// convex, unused for plain convex.
struct Convexity {
  ConvexityClass kind = ConvexityClass::convex;
  double modulus = 0.0;

  static Convexity strongly(double mu) { return {ConvexityClass::strongly_convex, mu}; }
  static Convexity plain() { return {ConvexityClass::convex, 0.0}; }
  static Convexity weakly(double rho) { return {ConvexityClass::weakly_convex, rho}; }

  double mu() const noexcept { return kind == ConvexityClass::strongly_convex ? modulus : 0.0; }
};

struct Box {
  double lo = -1.0;
  double hi = 1.0;
};

/// Euclidean projection onto [lo, hi]^d.
inline void project_box(std::span<double> x, const Box& box) {
  for (double& v : x) v = std::clamp(v, box.lo, box.hi);
}

inline std::vector<double> project_box(std::span<const double> x, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("project_box: lo > hi");
  std::vector<double> out(x.begin(), x.end());
  project_box(out, Box{lo, hi});
  return out;
}

/// f(x) = (1/N) sum_i f_i(x) over a box, with per-agent subgradient oracles.
/// Immutable once built; the oracles must be reentrant.
struct ObjectiveSpec {
  using ValueFn = std::function<double(std::size_t, std::span<const double>)>;
  using SubgradientFn =
      std::function<void(std::size_t, std::span<const double>, std::span<double>)>;

  std::string name;
  std::size_t n_agents = 0;
  std::size_t dim = 0;
  ValueFn local_value;
  SubgradientFn local_subgradient;
  std::vector<double> lipschitz_local;
  double lipschitz_global = 0.0;
  Convexity convexity;
  Box feasible_box;

  std::vector<double> subgradient(std::size_t i, std::span<const double> x) const {
    std::vector<double> g(dim);
    local_subgradient(i, x, g);
    return g;
  }
};

inline double global_value(const ObjectiveSpec& spec, std::span<const double> x) {
  if (x.size() != spec.dim) throw std::invalid_argument("global_value: dimension mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < spec.n_agents; ++i) sum += spec.local_value(i, x);
  return sum / static_cast<double>(spec.n_agents);
}

/// Mean of the local subgradients; a subgradient of f.
inline void global_subgradient(const ObjectiveSpec& spec, std::span<const double> x,
                               std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> g(spec.dim);
  for (std::size_t i = 0; i < spec.n_agents; ++i) {
    spec.local_subgradient(i, x, g);
    for (std::size_t d = 0; d < spec.dim; ++d) out[d] += g[d];
  }
  for (double& v : out) v /= static_cast<double>(spec.n_agents);
}

// --- datasets -------------------------------------------------------------

struct Sample {
  std::vector<double> features;
  double label = 0.0;
};

struct Dataset {
  std::vector<Sample> rows;

  std::size_t size() const noexcept { return rows.size(); }
  std::size_t dim() const noexcept { return rows.empty() ? 0 : rows.front().features.size(); }
};

/// n rows with every feature and label i.i.d. uniform on [0, 1].
inline Dataset generate_synthetic_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("generate_synthetic_dataset: n, d must be >= 1");
  CounterStream rng = make_stream(seed, StreamDomain::dataset);
  Dataset ds;
  ds.rows.resize(n);
  for (auto& row : ds.rows) {
    row.features.resize(d);
    for (double& v : row.features) v = rng.uniform01();
    row.label = rng.uniform01();
  }
  return ds;
}

/// CSV with d feature columns then the label, no header.
inline void write_dataset_csv(std::ostream& os, const Dataset& ds) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& row : ds.rows) {
    for (double v : row.features) out << v << ',';
    out << row.label << '\n';
  }
  os << out.str();
}

inline Dataset read_dataset_csv(std::istream& is) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::invalid_argument("read_dataset_csv: bad number on line " +
                                    std::to_string(lineno));
      }
    }
    if (values.size() < 2)
      throw std::invalid_argument("read_dataset_csv: line " + std::to_string(lineno) +
                                  " needs at least one feature and a label");
    Sample s;
    s.label = values.back();
    values.pop_back();
    s.features = std::move(values);
    if (!ds.rows.empty() && s.features.size() != ds.dim())
      throw std::invalid_argument("read_dataset_csv: inconsistent column count on line " +
                                  std::to_string(lineno));
    ds.rows.push_back(std::move(s));
  }
  return ds;
}

// --- built-in objectives --------------------------------------------------

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += a[d] * b[d];
  return s;
}

/// max over the box of |a^T x - b|; attained at a vertex.
inline double max_abs_residual_on_box(std::span<const double> a, double b, const Box& box) {
  double hi = 0.0, lo = 0.0;
  for (double ad : a) {
    hi += std::max(ad * box.lo, ad * box.hi);
    lo += std::min(ad * box.lo, ad * box.hi);
  }
  return std::max(std::abs(hi - b), std::abs(lo - b));
}

}  // namespace detail

/// Local losses f_i(x) = (a_i^T x - b_i)^2 on [-1, 1]^d.
///
/// L_i = 2 |a_i| max_box |a_i^T x - b_i|. The convexity tag is strongly
/// convex with mu = lambda_min((2/N) sum a_i a_i^T) when that is positive,
/// plain convex otherwise.
inline ObjectiveSpec linear_regression_objective(Dataset data, Box box = {}) {
  if (data.rows.empty()) throw std::invalid_argument("linear_regression_objective: empty dataset");
  const std::size_t d = data.dim();
  for (const auto& row : data.rows)
    if (row.features.size() != d)
      throw std::invalid_argument("linear_regression_objective: dimension mismatch among rows");

  auto shared = std::make_shared<const Dataset>(std::move(data));
  ObjectiveSpec spec;
  spec.name = "regression";
  spec.n_agents = shared->size();
  spec.dim = d;
  spec.feasible_box = box;
  spec.local_value = [shared](std::size_t i, std::span<const double> x) {
    const auto& row = shared->rows[i];
    const double r = detail::dot(row.features, x) - row.label;
    return r * r;
  };
  spec.local_subgradient = [shared](std::size_t i, std::span<const double> x,
                                    std::span<double> g) {
    const auto& row = shared->rows[i];
    const double r = detail::dot(row.features, x) - row.label;
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = 2.0 * row.features[k] * r;
  };

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                               static_cast<Eigen::Index>(d));
  for (const auto& row : shared->rows) {
    const Eigen::Map<const Eigen::VectorXd> a(row.features.data(), static_cast<Eigen::Index>(d));
    gram += a * a.transpose();
    const double norm = a.norm();
    spec.lipschitz_local.push_back(2.0 * norm *
                                   detail::max_abs_residual_on_box(row.features, row.label, box));
  }
  spec.lipschitz_global =
      std::accumulate(spec.lipschitz_local.begin(), spec.lipschitz_local.end(), 0.0);
  gram *= 2.0 / static_cast<double>(spec.n_agents);
  const double mu = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly)
                        .eigenvalues()
                        .minCoeff();
  // Rank-deficient Gram matrices give mu at round-off level; treat as convex.
  spec.convexity = mu > 1e-12 * gram.norm() ? Convexity::strongly(mu) : Convexity::plain();
  return spec;
}

/// Local losses f_i(x) = |x - c_i|^2. Strongly convex with mu = 2; the
/// constrained minimizer is the box clamp of the mean center.
inline ObjectiveSpec centers_objective(std::vector<std::vector<double>> centers, Box box = {}) {
  if (centers.empty()) throw std::invalid_argument("centers_objective: no centers");
  const std::size_t d = centers.front().size();
  for (const auto& c : centers)
    if (c.size() != d) throw std::invalid_argument("centers_objective: dimension mismatch");
  auto shared = std::make_shared<const std::vector<std::vector<double>>>(std::move(centers));
  ObjectiveSpec spec;
  spec.name = "centers";
  spec.n_agents = shared->size();
  spec.dim = d;
  spec.feasible_box = box;
  spec.convexity = Convexity::strongly(2.0);
  spec.local_value = [shared](std::size_t i, std::span<const double> x) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double diff = x[k] - (*shared)[i][k];
      s += diff * diff;
    }
    return s;
  };
  spec.local_subgradient = [shared](std::size_t i, std::span<const double> x,
                                    std::span<double> g) {
    for (std::size_t k = 0; k < x.size(); ++k) g[k] = 2.0 * (x[k] - (*shared)[i][k]);
  };
  for (const auto& c : *shared) {
    double far = 0.0;
    for (double ck : c) {
      const double e = std::max(std::abs(ck - box.lo), std::abs(box.hi - ck));
      far += e * e;
    }
    spec.lipschitz_local.push_back(2.0 * std::sqrt(far));
  }
  spec.lipschitz_global =
      std::accumulate(spec.lipschitz_local.begin(), spec.lipschitz_local.end(), 0.0);
  return spec;
}

/// Centers drawn uniformly from [-1.5, 1.5]^d so some clamps are active.
inline ObjectiveSpec synthetic_centers_objective(std::size_t n, std::size_t d,
                                                 std::uint64_t seed) {
  CounterStream rng = make_stream(seed, StreamDomain::dataset);
  std::vector<std::vector<double>> centers(n, std::vector<double>(d));
  for (auto& c : centers)
    for (double& v : c) v = -1.5 + 3.0 * rng.uniform01();
  return centers_objective(std::move(centers));
}

}  // namespace gdsrq
