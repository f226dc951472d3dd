// Acceptance harness: one PASS/FAIL line per criterion. argv[1] is the edge binary.
#include "ast_gen.hpp"
#include "support.hpp"

#include "edge/engine.hpp"
#include "edge/io.hpp"
#include "edge/operators.hpp"
#include "edge/oracle.hpp"
#include "edge/parser.hpp"
#include "edge/stdlib.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <sys/wait.h>
#include <unistd.h>

using namespace edge;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

// Time budgets in seconds.
constexpr double kBudgetMerge = 1;
constexpr double kBudgetFibertree = 1;
constexpr double kBudgetDense = 300;
constexpr double kBudgetBfs = 60;
constexpr double kBudgetEquiv = 180;
constexpr double kBudgetCc = 60;
constexpr double kBudgetPopulate = 1;
constexpr double kBudgetRoundTrip = 30;
constexpr double kBudgetDeterminism = 60;
constexpr double kBudgetGuards = 10;

constexpr int kDenseCases = 1000;
constexpr int kGraphCases = 200;
constexpr int kGeneratedAsts = 500;
constexpr int64_t kMaxSpace = 100000;

std::string edge_bin;
fs::path scratch;

struct Failure {
    std::string why;
};

void require(bool ok, const std::string& why)
{
    if (!ok) throw Failure{why};
}

int failures = 0;

void criterion(int n, const std::string& name, double budget, const std::function<void()>& body)
{
    auto t0 = std::chrono::steady_clock::now();
    std::string why;
    bool ok = true;
    try {
        body();
    } catch (const Failure& f) {
        ok = false;
        why = f.why;
    } catch (const std::exception& e) {
        ok = false;
        why = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ok && secs > budget) {
        ok = false;
        why = "over the " + std::to_string(budget) + " s budget";
    }
    if (!ok) ++failures;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f s", secs);
    std::cout << (ok ? "PASS" : "FAIL") << " " << n << " " << name << " (" << buf << ")";
    if (!ok) std::cout << ": " << why;
    std::cout << std::endl;
}

// ---- 1 ----

void merge_tables()
{
    // Rows in the order No/No, No/Yes, Yes/No, Yes/Yes, as tabulated for each operator.
    const std::vector<std::pair<std::string, std::array<bool, 4>>> tables = {
        {"pass", {1, 1, 1, 1}}, {"none", {0, 0, 0, 0}}, {"cap", {0, 0, 0, 1}},   {"lonly", {0, 0, 1, 0}},
        {"left", {0, 0, 1, 1}}, {"ronly", {0, 1, 0, 0}}, {"right", {0, 1, 0, 1}}, {"xor", {0, 1, 1, 0}},
        {"cup", {0, 1, 1, 1}},  {"nor", {1, 0, 0, 0}},  {"eqv", {1, 0, 0, 1}},   {"notr", {1, 0, 1, 0}},
        {"bimpa", {1, 0, 1, 1}}, {"notl", {1, 1, 0, 0}}, {"aimpb", {1, 1, 0, 1}}, {"nand", {1, 1, 1, 0}},
    };
    require(merge_ops().size() == 16, "expected 16 merge operators");
    int cases = 0;
    for (const auto& [name, want] : tables)
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                bool got = merge_eval(name, a, b);
                require(got == want[a * 2 + b], name + "(" + std::to_string(a) + "," + std::to_string(b) + ")");
                ++cases;
            }
    require(cases == 64, "case count");
}

// ---- 2 ----

void fibertree_fixtures()
{
    Tensor a(TensorDecl{"A", {{"M", 3}, {"K", 3}}, DType::Int, Scalar::integer(0)});
    a.set({0, 0}, Scalar::integer(1));
    a.set({1, 0}, Scalar::integer(3));
    a.set({1, 2}, Scalar::integer(4));
    Tensor b(TensorDecl{"B", {{"K", 3}, {"N", 3}}, DType::Int, Scalar::integer(0)});
    b.set({0, 1}, Scalar::integer(2));
    b.set({0, 2}, Scalar::integer(1));
    b.set({1, 0}, Scalar::integer(5));
    b.set({2, 2}, Scalar::integer(3));
    require(a.occupancy() == 3, "occupancy(A)");
    require(b.occupancy() == 4, "occupancy(B)");
    require(b.get({0, 1}) == Scalar::integer(2), "get(B,(0,1))");
    require(b.get({0, 0}) == Scalar::integer(0), "get(B,(0,0))");
    auto items = a.nonempty();
    size_t pos = 0;
    while (pos < items.size() && items[pos].first != Point{1, 2}) ++pos;
    require(pos == 2, "position of A(1,2) is " + std::to_string(pos));
}

// ---- 3 ----

Store random_seed(std::mt19937_64& rng, const ast::Program& p)
{
    Store s;
    for (const auto& prm : ast::size_params(p)) s.params[prm] = std::uniform_int_distribution<int64_t>(1, 8)(rng);
    double density = std::uniform_real_distribution<double>(0.05, 0.6)(rng);
    for (const auto& u : ast::user_tensors(p))
        s.put(random_tensor(rng, resolve_decl(*p.find_decl(u), s.params), density));
    return s;
}

void engine_vs_dense()
{
    const std::vector<std::string> forms = {"gemm", "masked_gemm", "conv1d", "shift", "upper_triangle",
                                            "diag_case", "scale_by_rank", "elementwise_pow", "min_neighbor",
                                            "top3", "max_neighbor_id", "min_neighbor_2hop"};
    for (const auto& name : forms) {
        ast::Program p = stdlib::get_program(name).parse();
        std::mt19937_64 rng(std::hash<std::string>{}(name) ^ 0x5eed);
        for (int c = 0; c < kDenseCases; ++c) {
            Store seed = random_seed(rng, p);
            oracle::DenseOptions dopt;
            dopt.max_points = kMaxSpace;
            Store want = oracle::dense_run(p, seed, dopt);
            Store got = run(p, seed);
            std::string why;
            require(same_results(p, got, want, &why), name + " case " + std::to_string(c) + " differs at " + why);
        }
    }

    // The populate statement inside cc, on random slices.
    ast::Program cc = stdlib::get_program("cc").parse();
    const ast::Statement* target = nullptr;
    for (const auto& [s, vars] : ast::body_statements(cc))
        if (s->out.tensor == "N") target = s;
    require(target != nullptr, "cc has no N statement");
    std::mt19937_64 rng(77);
    for (int c = 0; c < kDenseCases; ++c) {
        Store st;
        st.params["V"] = std::uniform_int_distribution<int64_t>(1, 8)(rng);
        double density = std::uniform_real_distribution<double>(0.05, 0.6)(rng);
        for (const char* t : {"P", "H"})
            st.put_slice(0, random_tensor(rng, slice_decl(resolve_decl(*cc.find_decl(t), st.params)), density));
        GenEnv env{{"i", 0}};
        Tensor got = eval_stmt(cc, *target, st, env);
        Tensor want = oracle::dense_eval_stmt(cc, *target, st, env);
        require(got.equals(want), "cc populate case " + std::to_string(c));
    }
}

// ---- 4 ----

void bfs_end_to_end()
{
    const auto& bfs = stdlib::get_program("bfs");
    std::mt19937_64 rng(4);
    for (int c = 0; c < kGraphCases; ++c) {
        Graph g = random_spec_graph(rng);
        auto src = random_sources(rng, g.vertices, 1);
        auto r = stdlib::verify(bfs, g, src);
        require(r.pass, "graph " + std::to_string(c) + ": " + r.message);
    }
    for (int c = 0; c < kGraphCases / 4; ++c) {
        Graph g = random_spec_graph(rng);
        auto src = random_sources(rng, g.vertices, std::uniform_int_distribution<int64_t>(2, 5)(rng));
        auto r = stdlib::verify(bfs, g, src);
        require(r.pass, "multi-source graph " + std::to_string(c) + ": " + r.message);
    }
}

// ---- 5 ----

Store run_builtin(const std::string& name, const Graph& g, const std::vector<int64_t>& src)
{
    const auto& np = stdlib::get_program(name);
    ast::Program p = np.parse();
    return run(p, stdlib::graph_seed(np, p, stdlib::prepare_graph(np, g), src));
}

std::map<int64_t, std::string> union_of_generations(const Store& s, const std::string& name)
{
    std::map<int64_t, std::string> out;
    auto it = s.generations.find(name);
    if (it != s.generations.end())
        for (const auto& [gen, t] : it->second)
            t.for_each([&](const Point& p, const Scalar& v) { out.emplace(p.at(0), v.to_string()); });
    return out;
}

std::map<Point, std::string> contents(const Tensor* t)
{
    std::map<Point, std::string> out;
    if (t) t->for_each([&](const Point& p, const Scalar& v) { out[p] = v.to_string(); });
    return out;
}

std::set<int64_t> support(const Tensor* t)
{
    std::set<int64_t> out;
    if (t) t->for_each([&](const Point& p, const Scalar&) { out.insert(p.at(0)); });
    return out;
}

void equivalences()
{
    std::mt19937_64 rng(5);
    for (int c = 0; c < kGraphCases; ++c) {
        std::string at = "graph " + std::to_string(c) + ": ";
        Graph g = random_spec_graph(rng);
        auto src = random_sources(rng, g.vertices, std::uniform_int_distribution<int64_t>(1, 3)(rng));

        require(union_of_generations(run_builtin("bfs", g, src), "F") ==
                    union_of_generations(run_builtin("bfs_min", g, src), "F"),
                at + "bfs vs bfs_min");

        auto push = support(run_builtin("reach_push", g, src).latest("P"));
        auto pull = support(run_builtin("reach_pull", g, src).latest("P"));
        std::set<int64_t> green;
        for (const auto& [v, s] : union_of_generations(run_builtin("green_bfs", g, src), "F")) green.insert(v);
        require(push == pull, at + "reach_push vs reach_pull");
        require(push == green, at + "reach_push vs green_bfs");
        require(push == oracle::reachable(g, src), at + "reach_push vs reachable");

        auto bf = contents(run_builtin("bellman_ford", g, src).latest("Dist"));
        require(bf == contents(run_builtin("spfa", g, src).latest("Dist")), at + "bellman_ford vs spfa");
        require(bf == contents(run_builtin("dijkstra", g, src).latest("Dist")), at + "bellman_ford vs dijkstra");

        require(contents(run_builtin("masked_degree_fused", g, src).find("MaskedDegree")) ==
                    contents(run_builtin("masked_degree_cascade", g, src).find("MaskedDegree")),
                at + "masked degree");

        Graph u = unique_min_graph(rng, g.vertices, std::uniform_real_distribution<double>(0.05, 0.5)(rng));
        require(contents(run_builtin("min_neighbor", u, src).find("W")) ==
                    contents(run_builtin("min_neighbor_mapreduce", u, src).find("W")),
                at + "min_neighbor vs min_neighbor_mapreduce");
    }
}

// ---- 6 ----

void connected_components()
{
    const auto& cc = stdlib::get_program("cc");
    std::mt19937_64 rng(6);
    for (int c = 0; c < kGraphCases; ++c) {
        Graph g;
        int64_t n = std::uniform_int_distribution<int64_t>(1, 40)(rng);
        switch (c % 5) {
        case 0: g = disconnected_graph(rng, n); break;
        case 1: g = star_graph(n); break;
        case 2: g = path_graph(n); break;
        case 3: g = complete_graph(std::min<int64_t>(n, 12)); break;
        default: g = random_graph(rng, n, std::uniform_real_distribution<double>(0.02, 0.3)(rng)); break;
        }
        auto r = stdlib::verify(cc, g, {0});
        require(r.pass, "graph " + std::to_string(c) + ": " + r.message);
    }
}

// ---- 7 ----

void populate_fold()
{
    ast::Program p = parse_or_throw(R"(tensors {
  A[D=8]: int, empty=0;
  Y[D=8]: int, empty=0;
}
init {
  A = user;
}
einsum {
  Y[d*] = A[d] :: populate(d*; pass; maxval(3));
}
)");
    Store seed;
    Tensor a(resolve_decl(*p.find_decl("A"), {}));
    for (auto [c, v] : std::vector<std::pair<int64_t, int64_t>>{{0, 5}, {1, 2}, {3, 7}, {4, 6}, {5, 6}, {7, 1}})
        a.set({c}, Scalar::integer(v));
    seed.put(a);
    using Fiber = std::vector<std::pair<int64_t, int64_t>>;
    std::vector<Fiber> steps;
    RunOptions opt;
    opt.populate_observer = [&](const PopulateStep& s) {
        Fiber f;
        for (const auto& it : s.fiber) f.emplace_back(it.coord, it.value.as_int());
        steps.push_back(f);
    };
    Store out = run(p, seed, opt);
    const std::vector<Fiber> want = {
        {{0, 5}},
        {{0, 5}, {1, 2}},
        {{0, 5}, {1, 2}, {3, 7}},
        {{0, 5}, {3, 7}, {4, 6}},
        {{3, 7}, {4, 6}, {5, 6}},
        {{3, 7}, {4, 6}, {5, 6}},
    };
    require(steps.size() == want.size(), "saw " + std::to_string(steps.size()) + " steps");
    for (size_t i = 0; i < want.size(); ++i) require(steps[i] == want[i], "step " + std::to_string(i + 1));
    Fiber final;
    out.find("Y")->for_each([&](const Point& pt, const Scalar& v) { final.emplace_back(pt[0], v.as_int()); });
    require(final == want.back(), "final fiber");
}

// ---- 8 ----

void round_trip()
{
    auto check = [](const ast::Program& p, const std::string& what) {
        std::string text = pretty_print(p);
        ParseResult r = parse(text);
        require(r.ok(), what + " does not reparse: " + (r.ok() ? "" : r.diagnostics.front().format()));
        require(*r.program == p, what + " changes under round trip");
    };
    for (const auto& [name, desc] : stdlib::list_programs()) check(stdlib::get_program(name).parse(), name);
    for (int i = 0; i < kGeneratedAsts; ++i) check(AstGen(1000 + i).program(), "generated program " + std::to_string(i));
}

// ---- 9, 10 ----

int shell(const std::string& cmd)
{
    int st = std::system(cmd.c_str());
    if (st == -1 || !WIFEXITED(st)) return -1;
    return WEXITSTATUS(st);
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

void write_graph(const fs::path& path, const Graph& g)
{
    std::string mm = "%%MatrixMarket matrix coordinate integer general\n" + std::to_string(g.vertices) + " " +
                     std::to_string(g.vertices) + " " + std::to_string(g.edges.size()) + "\n";
    for (const auto& e : g.edges)
        mm += std::to_string(e.src + 1) + " " + std::to_string(e.dst + 1) + " " + std::to_string(e.weight) + "\n";
    write_text(path, mm);
}

void determinism()
{
    std::mt19937_64 rng(9);
    Graph g = random_graph(rng, 6, 0.4);
    fs::path graph = scratch / "fixed.mtx";
    write_graph(graph, g);
    for (const auto& [name, desc] : stdlib::list_programs()) {
        ast::Program p = stdlib::get_program(name).parse();
        std::string inputs;
        std::map<std::string, int64_t> params;
        for (const auto& prm : ast::size_params(p)) params[prm] = g.vertices;
        for (const auto& u : ast::user_tensors(p)) {
            const ast::TensorDeclAst* d = p.find_decl(u);
            if (d->ranks.size() == 2) continue;
            fs::path f = scratch / (name + "_" + u + ".dump");
            write_text(f, io::dump_string(random_tensor(rng, resolve_decl(*d, params), 0.6)));
            inputs += " --input " + u + "=" + quote(f);
        }
        std::string out[2];
        for (int k = 0; k < 2; ++k) {
            fs::path o = scratch / (name + "_" + std::to_string(k) + ".out");
            int code = shell(quote(edge_bin) + " run --builtin " + name + " --graph " + quote(graph) + " --sources 0,2" +
                             inputs + " --out " + quote(o) + " 2>/dev/null");
            require(code == 0, name + " exited " + std::to_string(code));
            out[k] = read_text(o);
        }
        require(!out[0].empty(), name + " produced no dump");
        require(out[0] == out[1], name + " dumps differ between runs");
    }
}

void guards()
{
    fs::path path3 = scratch / "path3.mtx";
    write_graph(path3, path_graph(3));
    auto run_cli = [&](const std::string& env, const std::string& args) {
        return shell(env + quote(edge_bin) + " " + args + " >/dev/null 2>&1");
    };
    int code = run_cli("", "run --builtin bfs --graph " + quote(path3) + " --max-iters 1");
    require(code == 3, "--max-iters 1 on a path gave exit " + std::to_string(code));
    code = run_cli("EDGE_MAX_GENERATIONS=1 ", "run --builtin bfs --graph " + quote(path3));
    require(code == 3, "EDGE_MAX_GENERATIONS=1 gave exit " + std::to_string(code));
    code = run_cli("", "run --builtin bfs --graph " + quote(path3) + " --max-iters 3");
    require(code == 0, "bfs with enough generations gave exit " + std::to_string(code));

    fs::path forever = scratch / "forever.edge";
    write_text(forever, R"(tensors {
  F[I, S=|V|]: bool, empty=false;
}
init {
  F[0, s] = true;
}
einsum {
  F[i+1, s] = F[i, s];
  until nnz(F[i+1]) == 0;
}
)");
    code = run_cli("", "run " + quote(forever) + " --param V=4 --max-iters 50");
    require(code == 3, "non-terminating cascade gave exit " + std::to_string(code));

    fs::path huge = scratch / "huge.edge";
    write_text(huge, R"(tensors {
  P[S=|V|, D=|V|]: bool, empty=false;
  Z[S=|V|, D=|V|]: bool, empty=false;
}
init {
  P[0, 0] = true;
}
einsum {
  Z[s, d] = not(P[s, d]);
}
)");
    code = run_cli("", "run " + quote(huge) + " --param V=1000000");
    require(code == 3, "oversized dense space gave exit " + std::to_string(code));
}

}  // namespace

int main(int argc, char** argv)
{
    if (argc < 2) {
        std::cerr << "usage: acceptance <edge-binary>\n";
        return 2;
    }
    edge_bin = fs::absolute(argv[1]).string();
    scratch = fs::temp_directory_path() / ("edge_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(scratch);

    criterion(1, "merge truth tables", kBudgetMerge, merge_tables);
    criterion(2, "fibertree fixtures", kBudgetFibertree, fibertree_fixtures);
    criterion(3, "engine equals dense oracle", kBudgetDense, engine_vs_dense);
    criterion(4, "bfs end to end", kBudgetBfs, bfs_end_to_end);
    criterion(5, "equivalence claims", kBudgetEquiv, equivalences);
    criterion(6, "connected components", kBudgetCc, connected_components);
    criterion(7, "populate fold", kBudgetPopulate, populate_fold);
    criterion(8, "parser round trip", kBudgetRoundTrip, round_trip);
    criterion(9, "cli determinism", kBudgetDeterminism, determinism);
    criterion(10, "guards", kBudgetGuards, guards);

    fs::remove_all(scratch);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
