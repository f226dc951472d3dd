#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support.hpp"

#include "edge/stdlib.hpp"

#include <random>

using namespace edge;
using namespace testsupport;

#ifndef EDGE_PROGRAMS_DIR
#error "EDGE_PROGRAMS_DIR must point at programs/"
#endif

TEST_CASE("programs on disk are byte-identical to the embedded copies")
{
    std::set<std::string> on_disk;
    for (const auto& e : std::filesystem::directory_iterator(EDGE_PROGRAMS_DIR))
        if (e.path().extension() == ".edge") on_disk.insert(e.path().stem().string());
    std::set<std::string> embedded;
    for (const auto& [name, desc] : stdlib::list_programs()) {
        embedded.insert(name);
        std::filesystem::path f = std::filesystem::path(EDGE_PROGRAMS_DIR) / (name + ".edge");
        CHECK_MESSAGE(read_text(f) == stdlib::get_program(name).source, name);
    }
    CHECK(on_disk == embedded);
}

TEST_CASE("lookup")
{
    ast::Program bfs = stdlib::get_program("bfs").parse();
    CHECK(bfs.decls.size() == 4);
    CHECK(bfs.inits.size() == 3);
    CHECK(bfs.body.items.size() == 3);
    CHECK(bfs.body.stop.has_value());
    ast::Program cc = stdlib::get_program("cc").parse();
    bool nested = false;
    for (const auto& it : cc.body.items) nested |= it.is_cascade;
    CHECK(nested);
    try {
        stdlib::get_program("nope");
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("bfs") != std::string::npos);
    }
}

TEST_CASE("list_programs")
{
    auto l = stdlib::list_programs();
    CHECK(l.size() == 26);
    std::set<std::string> names;
    for (size_t i = 0; i < l.size(); ++i) {
        names.insert(l[i].first);
        if (i) CHECK(l[i - 1].first < l[i].first);
        CHECK_FALSE(l[i].second.empty());
        CHECK_NOTHROW(stdlib::get_program(l[i].first));
    }
    CHECK(names.size() == l.size());
    CHECK(names.count("bfs"));
}

TEST_CASE("every graph algorithm has an oracle pairing")
{
    for (const char* name : {"bfs", "bfs_min", "reach_push", "reach_pull", "green_bfs", "bellman_ford", "spfa", "dijkstra",
                             "cc", "degree", "masked_degree_fused", "masked_degree_cascade", "min_edge_weight",
                             "min_neighbor", "min_neighbor_mapreduce", "min_neighbor_2hop", "top3", "max_neighbor_id"})
        CHECK_MESSAGE(stdlib::get_program(name).graph_program(), name);
    CHECK_FALSE(stdlib::get_program("gemm").graph_program());
    CHECK_THROWS_AS(stdlib::verify(stdlib::get_program("gemm"), path_graph(3), {0}), std::invalid_argument);
}

TEST_CASE("required bindings")
{
    const auto& bfs = stdlib::get_program("bfs");
    CHECK(bfs.params == std::set<std::string>{"V"});
    CHECK(bfs.lists == std::set<std::string>{"id"});
    CHECK(bfs.user_tensors == std::vector<std::string>{"G"});
}

TEST_CASE("every graph program matches its oracle on 200 random graphs")
{
    for (const auto& [name, desc] : stdlib::list_programs()) {
        const auto& np = stdlib::get_program(name);
        if (!np.graph_program()) continue;
        std::mt19937_64 rng(std::hash<std::string>{}(name));
        for (int c = 0; c < 200; ++c) {
            Graph g = np.oracle == stdlib::OracleKind::MinNeighborTies
                          ? unique_min_graph(rng, std::uniform_int_distribution<int64_t>(1, 64)(rng),
                                             std::uniform_real_distribution<double>(0.05, 0.5)(rng))
                          : random_spec_graph(rng);
            auto src = random_sources(rng, g.vertices, std::uniform_int_distribution<int64_t>(1, 3)(rng));
            auto r = stdlib::verify(np, g, src);
            REQUIRE_MESSAGE(r.pass, name << " graph " << c << ": " << r.message);
        }
    }
}

TEST_CASE("a tampered result is reported with its first divergence")
{
    const auto& np = stdlib::get_program("bfs");
    ast::Program p = np.parse();
    Graph g = path_graph(4);
    Store s = run(p, stdlib::graph_seed(np, p, stdlib::prepare_graph(np, g), {0}));
    Tensor f2 = *s.slice("F", 2);
    f2.set({2}, Scalar::integer(5));
    s.put_slice(2, f2);
    auto r = stdlib::compare_with_oracle(np, s, g, {0});
    CHECK_FALSE(r.pass);
    CHECK(r.message == "first divergence at vertex 2: engine 5, oracle 2");
}

TEST_CASE("a faulty operator registry fails verification")
{
    // min that returns the larger value.
    OperatorRegistry reg;
    const OperatorRegistry& base = builtin_registry();
    for (const auto& n : base.binary_names())
        if (n != "min") reg.add(base.binary(n));
    reg.add(BinaryOp{"min",
                     [](const IterPoint&, const Operand& l, const Operand& r) -> std::optional<Scalar> {
                         return compare(l.value, r.value) >= 0 ? l.value : r.value;
                     },
                     true, true});
    for (const char* u : {"not", "neg", "eexp"}) reg.add(base.unary(u));
    for (const char* c : {"pass", "minval", "maxval", "mincoord", "maxcoord"}) reg.add(base.coord(c));
    RunOptions opt;
    opt.registry = &reg;
    // Vertex 3 is reached from 1 and 2 in the same step, so min must choose.
    Graph g{4, {{0, 1, 1}, {0, 2, 5}, {1, 3, 1}, {2, 3, 1}}};
    auto r = stdlib::verify(stdlib::get_program("bellman_ford"), g, {0}, opt);
    CHECK_FALSE(r.pass);
    CHECK(r.message.find("first divergence at vertex") == 0);
}
