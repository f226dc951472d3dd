#pragma once

#include "edge/ast.hpp"
#include "edge/engine.hpp"
#include "edge/fibertree.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace edge::oracle {

struct Edge {
    int64_t src = 0;
    int64_t dst = 0;
    int64_t weight = 1;
};

struct Graph {
    int64_t vertices = 0;
    std::vector<Edge> edges;

    // Both directions of every edge, duplicates removed (first weight wins).
    Graph symmetrized() const;
    Tensor to_tensor(DType dtype, const Scalar& empty, const std::string& name = "G") const;
};

Graph from_tensor(const Tensor& t);

using DepthMap = std::map<int64_t, int64_t>;
using Partition = std::map<int64_t, int64_t>;

struct DenseOptions {
    int64_t max_points = 100000000;
    const OperatorRegistry* registry = nullptr;
    int64_t max_generations = 100000;
};

// Literal evaluation of one statement: every point of the full cartesian space, no culling.
Tensor dense_eval_stmt(const ast::Program& p, const ast::Statement& s, const Store& store, const GenEnv& env,
                       const DenseOptions& opt = {});

// Whole-program evaluation with dense_eval_stmt; case and update statements are evaluated directly.
Store dense_run(const ast::Program& p, Store seed, const DenseOptions& opt = {});

DepthMap bfs_oracle(const Graph& g, const std::vector<int64_t>& sources);
// Multi-source distances (minimum over sources). Throws on negative weights.
DepthMap sssp_dijkstra(const Graph& g, const std::vector<int64_t>& sources);
DepthMap sssp_bellman_ford(const Graph& g, const std::vector<int64_t>& sources);
// Undirected components labeled by their smallest vertex.
Partition cc_oracle(const Graph& g);
bool partitions_equal(const Partition& a, const Partition& b);

std::set<int64_t> reachable(const Graph& g, const std::vector<int64_t>& sources);
std::map<int64_t, int64_t> degree_oracle(const Graph& g);
std::map<int64_t, int64_t> masked_degree_oracle(const Graph& g, const std::vector<int64_t>& mask);
std::map<int64_t, int64_t> min_weight_oracle(const Graph& g);

using EdgeMap = std::map<std::pair<int64_t, int64_t>, int64_t>;
// Per source: the minimum-weight neighbor, ties to the smaller id.
EdgeMap min_neighbor_oracle(const Graph& g);
// Per source: every neighbor attaining the minimum weight.
EdgeMap min_neighbor_ties_oracle(const Graph& g);
// Per source: the k heaviest neighbors, ties to the smaller id.
EdgeMap top_k_oracle(const Graph& g, int64_t k);
EdgeMap max_neighbor_id_oracle(const Graph& g);
// Per source s with minimum neighbor n: min over edges n->p of w(s,n) + w(n,p).
EdgeMap two_hop_oracle(const Graph& g);

}  // namespace edge::oracle
