#include "facecorr/graph_org.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <numeric>

#include "facecorr/tps.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace fc {

double pair_weight(const std::vector<Vec2>& landmarks_i, const std::vector<Vec2>& landmarks_j) {
  const double beta_ij = tps_bending_energy(landmarks_i, landmarks_j);
  const double beta_ji = tps_bending_energy(landmarks_j, landmarks_i);
  return 0.5 * (beta_ij + beta_ji);
}

FaceGraph weight_matrix_serial(const std::vector<std::vector<Vec2>>& landmarks) {
  const int n = static_cast<int>(landmarks.size());
  FaceGraph g;
  g.weights = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double w = pair_weight(landmarks[i], landmarks[j]);
      g.weights(i, j) = g.weights(j, i) = w;
    }
  }
  return g;
}

FaceGraph weight_matrix(const std::vector<std::vector<Vec2>>& landmarks, int threads) {
  const int n = static_cast<int>(landmarks.size());
  FaceGraph g;
  g.weights = Eigen::MatrixXd::Zero(n, n);

  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

  const int np = static_cast<int>(pairs.size());
#if defined(_OPENMP)
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for num_threads(nt) schedule(dynamic, 1)
#else
  (void)threads;
#endif
  for (int k = 0; k < np; ++k) {
    const auto [i, j] = pairs[k];
    const double w = pair_weight(landmarks[i], landmarks[j]);
    g.weights(i, j) = w;
    g.weights(j, i) = w;
  }
  return g;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

}  // namespace

SpanningTree build_mst(const FaceGraph& graph, int root_override) {
  const int n = graph.node_count();
  if (n < 1) throw Error("empty graph");

  struct E {
    double w;
    int a, b;
  };
  std::vector<E> edges;
  edges.reserve(n * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.push_back({graph.weights(i, j), i, j});
  std::sort(edges.begin(), edges.end(), [](const E& x, const E& y) {
    if (x.w != y.w) return x.w < y.w;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });

  UnionFind uf(n);
  std::vector<std::vector<int>> adjacency(n);
  int taken = 0;
  for (const auto& e : edges) {
    if (!uf.unite(e.a, e.b)) continue;
    adjacency[e.a].push_back(e.b);
    adjacency[e.b].push_back(e.a);
    if (++taken == n - 1) break;
  }

  SpanningTree tree;
  tree.parent_of.assign(n, -1);
  if (root_override >= 0 && root_override < n) {
    tree.root = root_override;
  } else {
    tree.root = 0;
    for (int i = 1; i < n; ++i)
      if (adjacency[i].size() > adjacency[tree.root].size()) tree.root = i;
  }

  std::deque<int> queue{tree.root};
  std::vector<bool> seen(n, false);
  seen[tree.root] = true;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    std::sort(adjacency[u].begin(), adjacency[u].end());
    for (int v : adjacency[u]) {
      if (seen[v]) continue;
      seen[v] = true;
      tree.parent_of[v] = u;
      tree.edges.emplace_back(u, v);
      queue.push_back(v);
    }
  }
  return tree;
}

std::string serialize_edge_list(const SpanningTree& tree, const FaceGraph& graph) {
  std::string out;
  char buf[96];
  for (const auto& [parent, child] : tree.edges) {
    std::snprintf(buf, sizeof(buf), "%d %d %.17g\n", parent, child,
                  graph.weights(parent, child));
    out += buf;
  }
  return out;
}

}  // namespace fc
