#pragma once

#include "edge/ast.hpp"
#include "edge/engine.hpp"
#include "edge/oracle.hpp"

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace edge {

namespace detail {

struct EmbeddedProgram {
    const char* name;
    const char* text;
};

// Generated at configure time from programs/*.edge.
const std::vector<EmbeddedProgram>& embedded_programs();

}  // namespace detail

namespace stdlib {

enum class OracleKind {
    None,
    Bfs,           // depths from every F generation vs queue BFS
    Reach,         // latest P vs reachable set
    ReachGreen,    // union of F generations vs reachable set
    Sssp,          // latest Dist vs Dijkstra
    Cc,            // latest P labels vs union-find partition
    Degree,
    MaskedDegree,
    MinWeight,
    MinNeighbor,
    MinNeighborTies,
    Top3,
    MaxNeighborId,
    TwoHop,
};

// How the graph's edge weights enter the program.
enum class Weights { Unit, File };

struct NamedProgram {
    std::string name;
    std::string description;  // first comment line of the source
    std::string source;
    std::set<std::string> params;
    std::set<std::string> lists;
    std::vector<std::string> user_tensors;
    OracleKind oracle = OracleKind::None;
    Weights weights = Weights::File;
    bool undirected = false;

    bool graph_program() const { return oracle != OracleKind::None; }
    ast::Program parse() const;
};

const NamedProgram& get_program(const std::string& name);
// Alphabetical (name, description) pairs.
std::vector<std::pair<std::string, std::string>> list_programs();

struct VerifyResult {
    bool pass = false;
    std::string message;  // first divergence when failing
};

// The graph the program should see: unit weights or symmetrized as its pairing requires.
oracle::Graph prepare_graph(const NamedProgram& np, const oracle::Graph& g);
// Store seed for a graph program: G, the `id` list and |V|.
Store graph_seed(const NamedProgram& np, const ast::Program& p, const oracle::Graph& g,
                 const std::vector<int64_t>& sources);
VerifyResult compare_with_oracle(const NamedProgram& np, const Store& result, const oracle::Graph& g,
                                 const std::vector<int64_t>& sources);
// Runs the program on the prepared graph and compares it with its oracle.
VerifyResult verify(const NamedProgram& np, const oracle::Graph& g, const std::vector<int64_t>& sources,
                    const RunOptions& opt = {});

}  // namespace stdlib
}  // namespace edge
