#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "gdsrq/network.hpp"

using namespace gdsrq;

namespace {

Graph path3() { return Graph(3, {{0, 1}, {1, 2}}); }

// Disjoint-set forest, kept independent of the BFS in is_connected.
struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
  std::size_t components() {
    std::size_t c = 0;
    for (std::size_t i = 0; i < parent.size(); ++i) c += find(i) == i;
    return c;
  }
};

}  // namespace

TEST(GeometricGraph, SingleNode) {
  const Graph g = generate_geometric_graph(1, 0.3, 5);
  EXPECT_EQ(g.size(), 1u);
  EXPECT_TRUE(g.edges().empty());
  EXPECT_TRUE(is_connected(g));
}

TEST(GeometricGraph, TwoNodesWithLargeRadiusAlwaysConnect) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Graph g = generate_geometric_graph(2, 1.5, seed);
    ASSERT_EQ(g.edges().size(), 1u);
    EXPECT_EQ(g.edges()[0], (Edge{0, 1}));
    EXPECT_EQ(g.attempts(), 1u);
  }
}

TEST(GeometricGraph, EdgeCountMatchesPairwiseScan) {
  const Graph g = generate_geometric_graph(50, 0.3, 42);
  ASSERT_TRUE(is_connected(g));
  std::size_t count = 0;
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 50; ++j) {
      if (i == j) continue;
      const double dist = std::hypot(g.coords()[i][0] - g.coords()[j][0],
                                     g.coords()[i][1] - g.coords()[j][1]);
      if (dist < 0.3) {
        ++count;
        EXPECT_TRUE(g.has_edge(i, j));
      }
    }
  EXPECT_EQ(count, 2 * g.edges().size());
}

TEST(GeometricGraph, Reproducible) {
  const Graph a = generate_geometric_graph(40, 0.3, 9);
  const Graph b = generate_geometric_graph(40, 0.3, 9);
  EXPECT_EQ(a.edges(), b.edges());
  EXPECT_EQ(a.coords(), b.coords());
  EXPECT_NE(a.coords(), generate_geometric_graph(40, 0.3, 10).coords());
}

TEST(GeometricGraph, HopelessRadiusThrows) {
  EXPECT_THROW(generate_geometric_graph(30, 1e-6, 1), std::runtime_error);
  EXPECT_THROW(generate_geometric_graph(0, 0.3, 1), std::invalid_argument);
  EXPECT_THROW(generate_geometric_graph(5, 0.0, 1), std::invalid_argument);
}

TEST(GraphTest, RejectsBadEdges) {
  EXPECT_THROW(Graph(3, {{0, 3}}), std::invalid_argument);
  EXPECT_THROW(Graph(3, {{1, 1}}), std::invalid_argument);
  const Graph g(3, {{2, 0}, {0, 2}});
  EXPECT_EQ(g.edges().size(), 1u);
  EXPECT_TRUE(g.has_edge(0, 2) && g.has_edge(2, 0));
}

TEST(Connectivity, Cases) {
  EXPECT_FALSE(is_connected(Graph(2, {})));
  EXPECT_TRUE(is_connected(path3()));

  Graph base = generate_geometric_graph(50, 0.35, 3);
  std::vector<Edge> edges;
  for (auto e : base.edges())
    if (e.first != 17 && e.second != 17) edges.push_back(e);
  const Graph cut(50, edges);
  UnionFind uf(50);
  for (auto [i, j] : cut.edges()) uf.unite(i, j);
  EXPECT_GT(uf.components(), 1u);
  EXPECT_FALSE(is_connected(cut));
}

TEST(Connectivity, AgreesWithUnionFind) {
  CounterStream rng = make_stream(4, StreamDomain::test);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform01() * 20);
    std::vector<Edge> edges;
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.uniform01() < 0.12) {
          edges.emplace_back(i, j);
          uf.unite(i, j);
        }
    EXPECT_EQ(is_connected(Graph(n, edges)), uf.components() == 1);
  }
}

TEST(LazyMetropolis, SingleNode) {
  const auto m = lazy_metropolis(Graph(1, {}));
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m(0, 0), 1.0);
}

TEST(LazyMetropolis, ThreePath) {
  const auto m = lazy_metropolis(path3());
  EXPECT_NEAR(m(0, 1), 1.0 / 6, 1e-15);
  EXPECT_NEAR(m(1, 2), 1.0 / 6, 1e-15);
  EXPECT_EQ(m(0, 2), 0.0);
  EXPECT_NEAR(m(0, 0), 5.0 / 6, 1e-15);
  EXPECT_NEAR(m(1, 1), 2.0 / 3, 1e-15);
  EXPECT_NEAR(m(2, 2), 5.0 / 6, 1e-15);
}

TEST(LazyMetropolis, TwoNodes) {
  const auto m = lazy_metropolis(Graph(2, {{0, 1}}));
  EXPECT_NEAR(m(0, 0), 0.75, 1e-15);
  EXPECT_NEAR(m(0, 1), 0.25, 1e-15);
  EXPECT_NEAR(m(1, 0), 0.25, 1e-15);
  EXPECT_NEAR(m(1, 1), 0.75, 1e-15);
}

TEST(LazyMetropolis, DisconnectedThrows) {
  EXPECT_THROW(lazy_metropolis(Graph(3, {{0, 1}})), std::invalid_argument);
}

TEST(LazyMetropolis, PropertiesOnRandomGraphs) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Graph g = generate_geometric_graph(30, 0.35, seed);
    auto m = lazy_metropolis(g);
    const auto rep = verify_doubly_stochastic(m, 1e-12, &g);
    EXPECT_TRUE(rep.passed()) << rep.summary();
    EXPECT_EQ((m.entries - m.entries.transpose()).cwiseAbs().maxCoeff(), 0.0);
    const Eigen::VectorXd ev =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m.entries).eigenvalues();
    EXPECT_NEAR(ev.maxCoeff(), 1.0, 1e-12);
    EXPECT_GT(ev.minCoeff(), -1e-12);  // lazy weights are positive semidefinite
    EXPECT_LT(second_largest_eigenvalue(m), 1.0);
  }
}

TEST(LazyMetropolis, PermutationEquivariant) {
  const Graph g = generate_geometric_graph(25, 0.4, 8);
  std::vector<std::size_t> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[3], perm[11]);
  std::vector<Edge> relabelled;
  for (auto [i, j] : g.edges()) relabelled.emplace_back(perm[i], perm[j]);
  const auto a = lazy_metropolis(g);
  const auto b = lazy_metropolis(Graph(25, relabelled));
  for (std::size_t i = 0; i < 25; ++i)
    for (std::size_t j = 0; j < 25; ++j) EXPECT_DOUBLE_EQ(a(i, j), b(perm[i], perm[j]));
}

TEST(SecondEigenvalue, KnownSpectra) {
  MixingMatrix one{Eigen::MatrixXd::Ones(1, 1)};
  EXPECT_EQ(second_largest_eigenvalue(one), 0.0);
  auto p = lazy_metropolis(path3());
  EXPECT_NEAR(second_largest_eigenvalue(p), 5.0 / 6, 1e-12);
  EXPECT_NEAR(p.sigma2, 5.0 / 6, 1e-12);
  auto two = lazy_metropolis(Graph(2, {{0, 1}}));
  EXPECT_NEAR(second_largest_eigenvalue(two), 0.5, 1e-12);
}

TEST(VerifyDoublyStochastic, IdentityOnPathFails) {
  const Graph g = path3();
  const MixingMatrix id{Eigen::MatrixXd::Identity(3, 3)};
  const auto rep = verify_doubly_stochastic(id, 1e-12, &g);
  EXPECT_FALSE(rep.passed());
  EXPECT_EQ(rep.zero_on_edge.size(), 2u);
  EXPECT_TRUE(verify_doubly_stochastic(id, 1e-12).passed());
}

TEST(VerifyDoublyStochastic, PerturbationTolerance) {
  const Graph g = generate_geometric_graph(10, 0.5, 2);
  auto m = lazy_metropolis(g);
  m.entries(0, 0) += 1e-6;
  EXPECT_FALSE(verify_doubly_stochastic(m, 1e-9, &g).passed());
  EXPECT_TRUE(verify_doubly_stochastic(m, 1e-3, &g).passed());
}

TEST(GraphIo, RoundTrip) {
  const Graph g = generate_geometric_graph(20, 0.4, 6);
  std::stringstream edges, coords;
  write_edge_list(edges, g);
  write_coordinates(coords, g);
  const Graph back = read_graph(edges, 20, &coords);
  EXPECT_EQ(back.edges(), g.edges());
  EXPECT_EQ(back.coords(), g.coords());
}
