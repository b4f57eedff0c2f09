#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gdsrq/random.hpp"

namespace gdsrq {

using Edge = std::pair<std::size_t, std::size_t>;
using Point2 = std::array<double, 2>;

/// Undirected simple graph. Edges are stored once with first < second,
/// sorted; adjacency lists are symmetric and sorted, without self-loops.
class Graph {
 public:
  Graph() = default;

  Graph(std::size_t n, std::vector<Edge> edges, std::vector<Point2> coords = {})
      : n_(n), coords_(std::move(coords)), adjacency_(n) {
    if (!coords_.empty() && coords_.size() != n_)
      throw std::invalid_argument("Graph: coordinate count does not match node count");
    for (auto [i, j] : edges) {
      if (i >= n_ || j >= n_) throw std::invalid_argument("Graph: edge endpoint out of range");
      if (i == j) throw std::invalid_argument("Graph: self-edges are not allowed");
      if (i > j) std::swap(i, j);
      edges_.emplace_back(i, j);
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    for (auto [i, j] : edges_) {
      adjacency_[i].push_back(j);
      adjacency_[j].push_back(i);
    }
    for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
  }

  std::size_t size() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<Point2>& coords() const noexcept { return coords_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_.at(i); }
  std::size_t degree(std::size_t i) const { return adjacency_.at(i).size(); }

  bool has_edge(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_ || i == j) return false;
    const auto& nbrs = adjacency_[i];
    return std::binary_search(nbrs.begin(), nbrs.end(), j);
  }

  /// Number of geometric draws that were needed to obtain this graph.
  std::size_t attempts() const noexcept { return attempts_; }
  void set_attempts(std::size_t a) noexcept { attempts_ = a; }

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<Point2> coords_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::size_t attempts_ = 1;
};

/// True iff a breadth-first search from node 0 reaches every node.
inline bool is_connected(const Graph& g) {
  const std::size_t n = g.size();
  if (n <= 1) return true;
  std::vector<char> seen(n, 0);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = 1;
  std::size_t visited = 1;
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (std::size_t v : g.neighbors(u)) {
      if (!seen[v]) {
        seen[v] = 1;
        ++visited;
        frontier.push(v);
      }
    }
  }
  return visited == n;
}

inline constexpr std::size_t kMaxGeometricAttempts = 10'000;

/// Random geometric graph on the unit square: nodes uniform, edge iff the
/// Euclidean distance is strictly below `radius`. Draws are repeated until
/// the graph is connected.
inline Graph generate_geometric_graph(std::size_t n, double radius, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_geometric_graph: n must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("generate_geometric_graph: radius must be > 0");

  CounterStream rng = make_stream(seed, StreamDomain::graph);
  const double r2 = radius * radius;
  for (std::size_t attempt = 1; attempt <= kMaxGeometricAttempts; ++attempt) {
    std::vector<Point2> coords(n);
    for (auto& p : coords) {
      p[0] = rng.uniform01();
      p[1] = rng.uniform01();
    }
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = coords[i][0] - coords[j][0];
        const double dy = coords[i][1] - coords[j][1];
        if (dx * dx + dy * dy < r2) edges.emplace_back(i, j);
      }
    }
    Graph g(n, std::move(edges), std::move(coords));
    if (is_connected(g)) {
      g.set_attempts(attempt);
      return g;
    }
  }
  throw std::runtime_error("generate_geometric_graph: no connected graph after " +
                           std::to_string(kMaxGeometricAttempts) + " attempts (n=" +
                           std::to_string(n) + ", radius=" + std::to_string(radius) +
                           "); the radius is too small for this node count");
}

/// Symmetric doubly stochastic weights. `sigma2` is filled by
/// second_largest_eigenvalue (negative until computed).
struct MixingMatrix {
  Eigen::MatrixXd entries;
  double sigma2 = -1.0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(entries.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

/// Lazy Metropolis weights a_ij = 1 / (2 max(|N_i|, |N_j|)) on edges, where
/// |N_i| counts node i itself; the diagonal takes the residual row mass.
inline MixingMatrix lazy_metropolis(const Graph& g) {
  if (!is_connected(g)) throw std::invalid_argument("lazy_metropolis: graph is not connected");
  const auto n = static_cast<Eigen::Index>(g.size());
  MixingMatrix m;
  m.entries = Eigen::MatrixXd::Zero(n, n);
  for (auto [i, j] : g.edges()) {
    const double size_i = static_cast<double>(g.degree(i) + 1);
    const double size_j = static_cast<double>(g.degree(j) + 1);
    const double w = 1.0 / (2.0 * std::max(size_i, size_j));
    m.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
    m.entries(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double off = 0.0;
    for (std::size_t j : g.neighbors(static_cast<std::size_t>(i)))
      off += m.entries(i, static_cast<Eigen::Index>(j));
    m.entries(i, i) = 1.0 - off;
  }
  return m;
}

/// Second largest eigenvalue magnitude: the eigenvalue closest to 1 is
/// dropped and the largest remaining |lambda| is returned. Stores the result
/// into m.sigma2. A 1x1 matrix yields 0.
inline double second_largest_eigenvalue(MixingMatrix& m) {
  if (m.size() <= 1) {
    m.sigma2 = 0.0;
    return 0.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.entries, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("second_largest_eigenvalue: eigensolver failed");
  std::vector<double> ev(solver.eigenvalues().data(),
                         solver.eigenvalues().data() + solver.eigenvalues().size());
  auto top = std::min_element(ev.begin(), ev.end(), [](double a, double b) {
    return std::abs(a - 1.0) < std::abs(b - 1.0);
  });
  ev.erase(top);
  double s = 0.0;
  for (double v : ev) s = std::max(s, std::abs(v));
  m.sigma2 = s;
  return s;
}

inline double second_largest_eigenvalue(const MixingMatrix& m) {
  MixingMatrix copy = m;
  return second_largest_eigenvalue(copy);
}

struct StochasticityReport {
  double tol = 0.0;
  double max_row_deviation = 0.0;
  double max_col_deviation = 0.0;
  double max_asymmetry = 0.0;
  double min_entry = 0.0;
  std::vector<Edge> zero_on_edge;       // a_ij == 0 although (i,j) is an edge
  std::vector<Edge> positive_off_edge;  // a_ij > 0 although (i,j) is not an edge

  bool passed() const noexcept {
    return max_row_deviation <= tol && max_col_deviation <= tol && max_asymmetry <= tol &&
           min_entry >= -tol && zero_on_edge.empty() && positive_off_edge.empty();
  }

  std::string summary() const {
    std::ostringstream os;
    os << (passed() ? "PASS" : "FAIL") << " tol=" << tol
       << " row_dev=" << max_row_deviation << " col_dev=" << max_col_deviation
       << " asym=" << max_asymmetry << " min_entry=" << min_entry
       << " zero_on_edge=" << zero_on_edge.size()
       << " positive_off_edge=" << positive_off_edge.size();
    return os.str();
  }
};

/// Checks row/column sums, symmetry and nonnegativity. When a graph is
/// given, also checks that the off-diagonal support matches its edge set.
inline StochasticityReport verify_doubly_stochastic(const MixingMatrix& m, double tol,
                                                    const Graph* g = nullptr) {
  if (!(tol > 0.0)) throw std::invalid_argument("verify_doubly_stochastic: tol must be > 0");
  StochasticityReport r;
  r.tol = tol;
  const auto& a = m.entries;
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("verify_doubly_stochastic: matrix not square");
  r.min_entry = n > 0 ? a.minCoeff() : 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    r.max_row_deviation = std::max(r.max_row_deviation, std::abs(a.row(i).sum() - 1.0));
    r.max_col_deviation = std::max(r.max_col_deviation, std::abs(a.col(i).sum() - 1.0));
    for (Eigen::Index j = i + 1; j < n; ++j)
      r.max_asymmetry = std::max(r.max_asymmetry, std::abs(a(i, j) - a(j, i)));
  }
  if (g != nullptr) {
    if (static_cast<Eigen::Index>(g->size()) != n)
      throw std::invalid_argument("verify_doubly_stochastic: graph size mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
        const bool edge = g->has_edge(ui, uj);
        if (edge && !(a(i, j) > 0.0) && i < j) r.zero_on_edge.emplace_back(ui, uj);
        if (!edge && a(i, j) > 0.0) r.positive_off_edge.emplace_back(ui, uj);
      }
    }
  }
  return r;
}

// Text exports: edge list ("i j" per line), coordinates ("x y" per line),
// and the mixing matrix as comma-separated rows.

inline void write_edge_list(std::ostream& os, const Graph& g) {
  for (auto [i, j] : g.edges()) os << i << ' ' << j << '\n';
}

inline void write_coordinates(std::ostream& os, const Graph& g) {
  std::ostringstream line;
  line.precision(17);
  for (const auto& p : g.coords()) line << p[0] << ' ' << p[1] << '\n';
  os << line.str();
}

inline Graph read_graph(std::istream& edge_list, std::size_t n, std::istream* coords = nullptr) {
  std::vector<Edge> edges;
  std::size_t i = 0, j = 0;
  while (edge_list >> i >> j) edges.emplace_back(i, j);
  std::vector<Point2> pts;
  if (coords != nullptr) {
    double x = 0.0, y = 0.0;
    while (*coords >> x >> y) pts.push_back({x, y});
  }
  return Graph(n, std::move(edges), std::move(pts));
}

inline void write_matrix_csv(std::ostream& os, const MixingMatrix& m) {
  std::ostringstream out;
  out.precision(17);
  for (Eigen::Index i = 0; i < m.entries.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.entries.cols(); ++j) {
      if (j > 0) out << ',';
      out << m.entries(i, j);
    }
    out << '\n';
  }
  os << out.str();
}

}  // namespace gdsrq
