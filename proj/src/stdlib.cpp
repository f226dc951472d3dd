#include "edge/stdlib.hpp"

#include "edge/parser.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace edge::stdlib {

namespace {

struct Pairing {
    OracleKind oracle;
    Weights weights;
    bool undirected;
};

const std::map<std::string, Pairing>& pairings()
{
    static const std::map<std::string, Pairing> m = {
        {"bfs", {OracleKind::Bfs, Weights::Unit, false}},
        {"bfs_min", {OracleKind::Bfs, Weights::Unit, false}},
        {"reach_push", {OracleKind::Reach, Weights::Unit, false}},
        {"reach_pull", {OracleKind::Reach, Weights::Unit, false}},
        {"green_bfs", {OracleKind::ReachGreen, Weights::Unit, false}},
        {"bellman_ford", {OracleKind::Sssp, Weights::File, false}},
        {"spfa", {OracleKind::Sssp, Weights::File, false}},
        {"dijkstra", {OracleKind::Sssp, Weights::File, false}},
        {"cc", {OracleKind::Cc, Weights::Unit, true}},
        {"degree", {OracleKind::Degree, Weights::Unit, false}},
        {"masked_degree_fused", {OracleKind::MaskedDegree, Weights::Unit, false}},
        {"masked_degree_cascade", {OracleKind::MaskedDegree, Weights::Unit, false}},
        {"min_edge_weight", {OracleKind::MinWeight, Weights::File, false}},
        {"min_neighbor", {OracleKind::MinNeighbor, Weights::File, false}},
        {"min_neighbor_mapreduce", {OracleKind::MinNeighborTies, Weights::File, false}},
        {"min_neighbor_2hop", {OracleKind::TwoHop, Weights::File, false}},
        {"top3", {OracleKind::Top3, Weights::File, false}},
        {"max_neighbor_id", {OracleKind::MaxNeighborId, Weights::File, false}},
    };
    return m;
}

std::vector<NamedProgram> build()
{
    std::vector<NamedProgram> out;
    for (const auto& e : detail::embedded_programs()) {
        NamedProgram np;
        np.name = e.name;
        np.source = e.text;
        if (np.source.rfind("# ", 0) == 0) np.description = np.source.substr(2, np.source.find('\n') - 2);
        ParseResult r = edge::parse(np.source, np.name + ".edge");
        if (!r.ok()) throw std::logic_error("bundled program " + np.name + " does not parse: " +
                                            r.diagnostics.front().format());
        np.params = ast::size_params(*r.program);
        np.lists = ast::list_names(*r.program);
        np.user_tensors = ast::user_tensors(*r.program);
        auto it = pairings().find(np.name);
        if (it != pairings().end()) {
            np.oracle = it->second.oracle;
            np.weights = it->second.weights;
            np.undirected = it->second.undirected;
        }
        out.push_back(std::move(np));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
}

const std::vector<NamedProgram>& all()
{
    static const std::vector<NamedProgram> v = build();
    return v;
}

std::string show(int64_t v) { return std::to_string(v); }
std::string show(const std::pair<int64_t, int64_t>& p) { return "(" + show(p.first) + ", " + show(p.second) + ")"; }
std::string show(bool) { return "present"; }

// First key where the two maps differ.
template <typename K, typename V>
VerifyResult diff(const std::map<K, V>& engine, const std::map<K, V>& oracle, const std::string& what)
{
    for (const auto& [k, v] : oracle) {
        auto it = engine.find(k);
        if (it == engine.end())
            return {false, "first divergence at " + what + " " + show(k) + ": engine absent, oracle " + show(v)};
        if (!(it->second == v))
            return {false, "first divergence at " + what + " " + show(k) + ": engine " + show(it->second) +
                               ", oracle " + show(v)};
    }
    for (const auto& [k, v] : engine)
        if (!oracle.count(k))
            return {false, "first divergence at " + what + " " + show(k) + ": engine " + show(v) + ", oracle absent"};
    return {true, "PASS"};
}

int64_t as_int(const Scalar& v)
{
    if (v.type() == DType::Bool) return v.as_bool() ? 1 : 0;
    if (v.type() == DType::Real) return static_cast<int64_t>(v.as_real());
    if (v.is_inf()) throw EvalError("infinite value where a finite one was expected");
    return v.as_int();
}

const Tensor& need(const Tensor* t, const std::string& name)
{
    if (!t) throw std::runtime_error("result tensor " + name + " is missing");
    return *t;
}

std::map<int64_t, int64_t> vector_map(const Tensor& t)
{
    std::map<int64_t, int64_t> m;
    t.for_each([&](const Point& p, const Scalar& v) { m[p.at(0)] = as_int(v); });
    return m;
}

oracle::EdgeMap matrix_map(const Tensor& t)
{
    oracle::EdgeMap m;
    t.for_each([&](const Point& p, const Scalar& v) { m[{p.at(0), p.at(1)}] = as_int(v); });
    return m;
}

std::map<int64_t, bool> as_set(const std::set<int64_t>& s)
{
    std::map<int64_t, bool> m;
    for (int64_t v : s) m[v] = true;
    return m;
}

}  // namespace

ast::Program NamedProgram::parse() const
{
    ParseResult r = edge::parse(source, name + ".edge");
    if (!r.ok()) throw std::logic_error("bundled program " + name + " does not parse");
    return std::move(*r.program);
}

const NamedProgram& get_program(const std::string& name)
{
    for (const auto& p : all())
        if (p.name == name) return p;
    std::string names;
    for (const auto& p : all()) names += (names.empty() ? "" : ", ") + p.name;
    throw std::invalid_argument("unknown program '" + name + "'; available: " + names);
}

std::vector<std::pair<std::string, std::string>> list_programs()
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& p : all()) out.emplace_back(p.name, p.description);
    return out;
}

oracle::Graph prepare_graph(const NamedProgram& np, const oracle::Graph& g)
{
    oracle::Graph out = np.undirected ? g.symmetrized() : g;
    if (np.weights == Weights::Unit)
        for (auto& e : out.edges) e.weight = 1;
    return out;
}

Store graph_seed(const NamedProgram& np, const ast::Program& p, const oracle::Graph& g,
                 const std::vector<int64_t>& sources)
{
    Store s;
    for (const auto& prm : np.params) s.params[prm] = g.vertices;
    if (np.lists.count("id")) s.lists["id"] = sources;
    const ast::TensorDeclAst* gd = p.find_decl("G");
    if (!gd) throw std::invalid_argument("program " + np.name + " has no graph tensor G");
    Tensor t(resolve_decl(*gd, s.params));
    g.to_tensor(gd->dtype, gd->empty).for_each([&](const Point& pt, const Scalar& v) { t.set(pt, v); });
    s.put(std::move(t));
    return s;
}

VerifyResult compare_with_oracle(const NamedProgram& np, const Store& r, const oracle::Graph& g,
                                 const std::vector<int64_t>& sources)
{
    switch (np.oracle) {
    case OracleKind::None: return {false, "program " + np.name + " has no oracle pairing"};
    case OracleKind::Bfs: {
        std::map<int64_t, int64_t> depth;
        auto it = r.generations.find("F");
        if (it != r.generations.end())
            for (const auto& [gen, t] : it->second)
                t.for_each([&](const Point& p, const Scalar& v) { depth.emplace(p.at(0), as_int(v)); });
        return diff(depth, oracle::bfs_oracle(g, sources), "vertex");
    }
    case OracleKind::Reach: {
        std::map<int64_t, bool> seen;
        need(r.latest("P"), "P").for_each([&](const Point& p, const Scalar&) { seen[p.at(0)] = true; });
        return diff(seen, as_set(oracle::reachable(g, sources)), "vertex");
    }
    case OracleKind::ReachGreen: {
        std::map<int64_t, bool> seen;
        auto it = r.generations.find("F");
        if (it != r.generations.end())
            for (const auto& [gen, t] : it->second)
                t.for_each([&](const Point& p, const Scalar&) { seen[p.at(0)] = true; });
        return diff(seen, as_set(oracle::reachable(g, sources)), "vertex");
    }
    case OracleKind::Sssp:
        return diff(vector_map(need(r.latest("Dist"), "Dist")), oracle::sssp_dijkstra(g, sources), "vertex");
    case OracleKind::Cc: {
        oracle::Partition part;
        VerifyResult bad{true, ""};
        need(r.latest("P"), "P").for_each([&](const Point& p, const Scalar&) {
            if (!part.emplace(p.at(0), p.at(1)).second)
                bad = {false, "vertex " + show(p.at(0)) + " carries more than one label"};
        });
        if (!bad.pass) return bad;
        oracle::Partition want = oracle::cc_oracle(g);
        for (const auto& [v, l] : want)
            if (!part.count(v)) return {false, "first divergence at vertex " + show(v) + ": engine has no label"};
        if (part.size() != want.size()) return {false, "engine labels vertices outside the graph"};
        if (oracle::partitions_equal(part, want)) return {true, "PASS"};
        for (const auto& [v, l] : want)
            for (const auto& [u, k] : want)
                if ((l == k) != (part.at(v) == part.at(u)))
                    return {false, "first divergence at vertices " + show(v) + ", " + show(u) + ": engine labels " +
                                       show(part.at(v)) + "/" + show(part.at(u)) + ", oracle labels " + show(l) +
                                       "/" + show(k)};
        return {false, "partitions differ"};
    }
    case OracleKind::Degree:
        return diff(vector_map(need(r.find("Degree"), "Degree")), oracle::degree_oracle(g), "vertex");
    case OracleKind::MaskedDegree:
        return diff(vector_map(need(r.find("MaskedDegree"), "MaskedDegree")),
                    oracle::masked_degree_oracle(g, sources), "vertex");
    case OracleKind::MinWeight:
        return diff(vector_map(need(r.find("MinWeight"), "MinWeight")), oracle::min_weight_oracle(g), "vertex");
    case OracleKind::MinNeighbor:
        return diff(matrix_map(need(r.find("W"), "W")), oracle::min_neighbor_oracle(g), "edge");
    case OracleKind::MinNeighborTies:
        return diff(matrix_map(need(r.find("W"), "W")), oracle::min_neighbor_ties_oracle(g), "edge");
    case OracleKind::Top3: return diff(matrix_map(need(r.find("W"), "W")), oracle::top_k_oracle(g, 3), "edge");
    case OracleKind::MaxNeighborId:
        return diff(matrix_map(need(r.find("W"), "W")), oracle::max_neighbor_id_oracle(g), "edge");
    case OracleKind::TwoHop: return diff(matrix_map(need(r.find("Z"), "Z")), oracle::two_hop_oracle(g), "pair");
    }
    return {false, "unknown oracle pairing"};
}

VerifyResult verify(const NamedProgram& np, const oracle::Graph& g, const std::vector<int64_t>& sources,
                    const RunOptions& opt)
{
    if (!np.graph_program()) throw std::invalid_argument("program " + np.name + " has no oracle pairing");
    ast::Program p = np.parse();
    Store seed = graph_seed(np, p, prepare_graph(np, g), sources);
    // The oracle sees exactly the edges the program sees (zero weights vanish under an empty of 0).
    oracle::Graph seen = oracle::from_tensor(*seed.find("G"));
    Store result = run(p, std::move(seed), opt);
    return compare_with_oracle(np, result, seen, sources);
}

}  // namespace edge::stdlib
