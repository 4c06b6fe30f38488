#pragma once

#include <cidet/common.hpp>
#include <cidet/rng.hpp>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace cidet {

/// Simple undirected graph: no self loops, no multi-edges, agents 0..N-1.
struct Graph {
  int n_agents = 0;
  std::vector<std::pair<int, int>> edges;  // each pair stored once with i < j

  std::vector<std::vector<int>> neighbors() const {
    std::vector<std::vector<int>> nbr(n_agents);
    for (auto [i, j] : edges) {
      nbr[i].push_back(j);
      nbr[j].push_back(i);
    }
    return nbr;
  }

  std::vector<int> degrees() const {
    std::vector<int> d(n_agents, 0);
    for (auto [i, j] : edges) {
      ++d[i];
      ++d[j];
    }
    return d;
  }
};

inline Graph graph_from_edges(int n, std::vector<std::pair<int, int>> edges) {
  if (n < 1) throw InvalidTopology("graph needs at least one agent");
  std::vector<std::pair<int, int>> norm;
  norm.reserve(edges.size());
  for (auto [i, j] : edges) {
    if (i == j) throw InvalidTopology("self loop");
    if (i < 0 || j < 0 || i >= n || j >= n) throw InvalidTopology("edge endpoint out of range");
    norm.emplace_back(std::min(i, j), std::max(i, j));
  }
  std::sort(norm.begin(), norm.end());
  if (std::adjacent_find(norm.begin(), norm.end()) != norm.end())
    throw InvalidTopology("multi-edge");
  return Graph{n, std::move(norm)};
}

/// Cycle topology: every agent has exactly two neighbors.
inline Graph build_ring(int n) {
  if (n < 3) throw InvalidTopology("ring needs n >= 3");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(n);
  for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  return graph_from_edges(n, std::move(edges));
}

inline Graph build_complete(int n) {
  if (n < 1) throw InvalidTopology("complete graph needs n >= 1");
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  return Graph{n, std::move(edges)};
}

struct Spectrum {
  Mat laplacian;     // L = D - A
  Vec eigenvalues;   // nondecreasing, eigenvalues[0] clamped to exactly 0

  double lambda2() const { return eigenvalues[1]; }
  double lambda_max() const { return eigenvalues[eigenvalues.size() - 1]; }
  bool connected() const { return eigenvalues.size() > 1 && lambda2() > kEigZeroTol; }
};

inline Mat laplacian_matrix(const Graph& g) {
  Mat l = Mat::Zero(g.n_agents, g.n_agents);
  for (auto [i, j] : g.edges) {
    l(i, i) += 1.0;
    l(j, j) += 1.0;
    l(i, j) -= 1.0;
    l(j, i) -= 1.0;
  }
  return l;
}

inline Spectrum spectrum(const Graph& g) {
  Mat l = laplacian_matrix(g);
  Eigen::SelfAdjointEigenSolver<Mat> es(l);
  Vec ev = es.eigenvalues();
  // symmetric eigensolvers return tiny negative values for lambda_1
  for (int i = 0; i < ev.size(); ++i)
    if (std::abs(ev[i]) < kEigZeroTol) ev[i] = 0.0;
  ev[0] = 0.0;
  return Spectrum{std::move(l), std::move(ev)};
}

/// Vertices uniform on the unit square, edge iff distance <= radius; the whole
/// graph is resampled until connected, up to max_retries.
inline Graph build_random_geometric(int n, double radius, std::uint64_t seed,
                                    int max_retries = 10000) {
  if (n < 2) throw InvalidInput("random geometric graph needs n >= 2");
  if (!(radius > 0.0)) throw InvalidInput("radius must be positive");
  GaussianStream rng(seed);
  double r2 = radius * radius;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = rng.next_uniform();
      y[i] = rng.next_uniform();
    }
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double dx = x[i] - x[j], dy = y[i] - y[j];
        if (dx * dx + dy * dy <= r2) edges.emplace_back(i, j);
      }
    Graph g{n, std::move(edges)};
    if (spectrum(g).connected()) return g;
  }
  throw ResourceExhausted("no connected geometric graph after " + std::to_string(max_retries) +
                          " resamples");
}

/// Doubly stochastic mixing matrix W = I - delta*L with delta = 2/(l2+lN),
/// and its spectral gap r = ||W - J||.
struct ConsensusWeights {
  Mat w;
  double delta = 0.0;
  double r = 0.0;
};

inline ConsensusWeights make_weights(const Spectrum& s) {
  if (!s.connected()) throw NotConnected("mixing matrix requires a connected graph");
  int n = static_cast<int>(s.eigenvalues.size());
  double l2 = s.lambda2(), ln = s.lambda_max();
  double delta = 2.0 / (l2 + ln);
  Mat w = Mat::Identity(n, n) - delta * s.laplacian;
  double r = (ln - l2) / (ln + l2);
  return ConsensusWeights{std::move(w), delta, r};
}

/// W = I - delta*L for a caller-chosen delta in (0, 2/lambda_N).
inline ConsensusWeights make_weights_with_delta(const Spectrum& s, double delta) {
  if (!s.connected()) throw NotConnected("mixing matrix requires a connected graph");
  if (!(delta > 0.0 && delta < 2.0 / s.lambda_max()))
    throw InvalidInput("delta must lie in (0, 2/lambda_N)");
  int n = static_cast<int>(s.eigenvalues.size());
  Mat w = Mat::Identity(n, n) - delta * s.laplacian;
  double r = std::max(std::abs(1.0 - delta * s.lambda2()),
                      std::abs(1.0 - delta * s.lambda_max()));
  return ConsensusWeights{std::move(w), delta, r};
}

/// ||W - J||_2 via eigendecomposition; cross-check for the closed-form r.
inline double spectral_gap_bruteforce(const Mat& w) {
  int n = static_cast<int>(w.rows());
  Mat j = Mat::Constant(n, n, 1.0 / n);
  Eigen::SelfAdjointEigenSolver<Mat> es(w - j);
  double lo = std::abs(es.eigenvalues()[0]);
  double hi = std::abs(es.eigenvalues()[n - 1]);
  return std::max(lo, hi);
}

inline Mat matrix_power(Mat base, long p) {
  if (p < 0) throw InvalidInput("negative matrix power");
  Mat acc = Mat::Identity(base.rows(), base.cols());
  while (p > 0) {
    if (p & 1) acc = acc * base;
    base = base * base;
    p >>= 1;
  }
  return acc;
}

/// Minimum number of consensus rounds between statistic refreshes:
/// k_min = 1 + floor(-3 log N / (2 log r)).
inline int min_consensus_rounds(int n, double r) {
  if (n < 1) throw InvalidInput("n must be positive");
  if (!(r > 0.0 && r < 1.0)) throw InvalidInput("r must lie in (0,1)");
  double val = -3.0 * std::log(static_cast<double>(n)) / (2.0 * std::log(r));
  return 1 + static_cast<int>(std::floor(val));
}

}  // namespace cidet
