#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support.hpp"

#include "edge/engine.hpp"
#include "edge/oracle.hpp"
#include "edge/stdlib.hpp"

using namespace edge;
using namespace testsupport;

namespace {

Store run_text(const std::string& text, Store seed, RunOptions opt = {})
{
    return run(parse_or_throw(text), std::move(seed), opt);
}

std::map<Point, int64_t> ints(const Tensor* t)
{
    std::map<Point, int64_t> m;
    if (t) t->for_each([&](const Point& p, const Scalar& v) { m[p] = v.is_inf() ? INT64_MAX : v.as_int(); });
    return m;
}

Store bfs_on(const Graph& g, std::vector<int64_t> src, RunOptions opt = {})
{
    const auto& np = stdlib::get_program("bfs");
    ast::Program p = np.parse();
    return run(p, stdlib::graph_seed(np, p, stdlib::prepare_graph(np, g), src), opt);
}

}  // namespace

TEST_CASE("bfs on a path")
{
    Store s = bfs_on(path_graph(3), {0});
    const auto& f = s.generations.at("F");
    CHECK(ints(&f.at(0)) == std::map<Point, int64_t>{{{0}, 0}});
    CHECK(ints(&f.at(1)) == std::map<Point, int64_t>{{{1}, 1}});
    CHECK(ints(&f.at(2)) == std::map<Point, int64_t>{{{2}, 2}});
    CHECK(f.at(3).occupancy() == 0);
    CHECK(f.size() == 4);
}

TEST_CASE("bfs seeded with every vertex stops after one pass")
{
    Store s = bfs_on(path_graph(4), {0, 1, 2, 3});
    const auto& f = s.generations.at("F");
    CHECK(f.at(0).occupancy() == 4);
    CHECK(f.at(1).occupancy() == 0);
    CHECK(f.size() == 2);
}

TEST_CASE("generation limit")
{
    RunOptions opt;
    opt.max_generations = 1;
    CHECK_THROWS_AS(bfs_on(path_graph(3), {0}, opt), LimitError);
    opt.max_generations = 3;
    CHECK_NOTHROW(bfs_on(path_graph(3), {0}, opt));
}

TEST_CASE("iteration point guard")
{
    const char* text = R"(tensors {
  P[S=|V|, D=|V|]: bool, empty=false;
  Z[S=|V|, D=|V|]: bool, empty=false;
}
init {
  P[0, 0] = true;
}
einsum {
  Z[s, d] = not(P[s, d]);
}
)";
    Store seed;
    seed.params["V"] = 2000;
    RunOptions opt;
    opt.max_points = 1000000;
    CHECK_THROWS_AS(run_text(text, seed, opt), LimitError);
    seed.params["V"] = 3;
    Store s = run_text(text, seed, opt);
    CHECK(s.find("Z")->occupancy() == 8);
}

TEST_CASE("gather step of bfs")
{
    ast::Program p = stdlib::get_program("bfs").parse();
    Store st;
    st.params["V"] = 3;
    Tensor g(resolve_decl(*p.find_decl("G"), st.params));
    g.set({0, 1}, Scalar::integer(1));
    g.set({0, 2}, Scalar::integer(1));
    st.put(g);
    Tensor f0(slice_decl(resolve_decl(*p.find_decl("F"), st.params)));
    f0.set({0}, Scalar::integer(0));
    st.put_slice(0, f0);
    Tensor t = eval_stmt(p, p.body.items[0].stmt, st, {{"i", 0}});
    CHECK(ints(&t) == std::map<Point, int64_t>{{{1}, 1}, {{2}, 1}});
}

TEST_CASE("upper triangle constraint")
{
    const char* text = R"(tensors {
  G[S=3, D=3]: int, empty=0;
  L[S=3, D=3]: int, empty=0;
}
init {
  G = user;
}
einsum {
  L[s: s < d, d] = G[s, d];
}
)";
    Store seed;
    Tensor g(TensorDecl{"G", {{"S", 3}, {"D", 3}}, DType::Int, Scalar::integer(0)});
    for (int64_t s = 0; s < 3; ++s)
        for (int64_t d = 0; d < 3; ++d) g.set({s, d}, Scalar::integer(1));
    seed.put(g);
    Store out = run_text(text, seed);
    CHECK(ints(out.find("L")) == std::map<Point, int64_t>{{{0, 1}, 1}, {{0, 2}, 1}, {{1, 2}, 1}});
}

TEST_CASE("broadcast over an output-only rank")
{
    const char* text = R"(tensors {
  A[M=3]: int, empty=0;
  Z[M=3, P=3]: int, empty=0;
}
init {
  A = user;
}
einsum {
  Z[m, p] = A[m];
}
)";
    Store seed;
    Tensor a(TensorDecl{"A", {{"M", 3}}, DType::Int, Scalar::integer(0)});
    a.set({1}, Scalar::integer(7));
    seed.put(a);
    Store out = run_text(text, seed);
    CHECK(ints(out.find("Z")) == std::map<Point, int64_t>{{{1, 0}, 7}, {{1, 1}, 7}, {{1, 2}, 7}});
}

TEST_CASE("map merge semantics")
{
    const char* tmpl = R"(tensors {
  A[K=4]: int, empty=0;
  B[K=4]: int, empty=0;
  Z[K=4]: int, empty=0;
}
init {
  A = user;
  B = user;
}
einsum {
  Z[k] = A[k] .1 B[k] :: map.1(k; add; MERGE);
}
)";
    Store seed;
    Tensor a(TensorDecl{"A", {{"K", 4}}, DType::Int, Scalar::integer(0)});
    Tensor b(TensorDecl{"B", {{"K", 4}}, DType::Int, Scalar::integer(0)});
    a.set({0}, Scalar::integer(3));
    a.set({1}, Scalar::integer(1));
    b.set({1}, Scalar::integer(2));
    b.set({2}, Scalar::integer(5));
    seed.put(a);
    seed.put(b);
    auto with = [&](const std::string& merge) {
        std::string text = tmpl;
        text.replace(text.find("MERGE"), 5, merge);
        return ints(run_text(text, seed).find("Z"));
    };
    CHECK(with("cap") == std::map<Point, int64_t>{{{1}, 3}});
    CHECK(with("cup") == std::map<Point, int64_t>{{{0}, 3}, {{1}, 3}, {{2}, 5}});
    CHECK(with("lonly") == std::map<Point, int64_t>{{{0}, 3}});
    CHECK(with("xor") == std::map<Point, int64_t>{{{0}, 3}, {{2}, 5}});
    CHECK(with("none").empty());
    // A pass merge walks every point; 0 + 0 equals the empty and stays absent.
    CHECK(with("pass") == with("cup"));
}

TEST_CASE("reduce folds in canonical order")
{
    const char* tmpl = R"(tensors {
  A[S=8]: int, empty=0;
  Z[]: int, empty=0;
}
init {
  A = user;
}
einsum {
  Z[] = A[s] :: reduce(s; OP; cup);
}
)";
    Store seed;
    Tensor a(TensorDecl{"A", {{"S", 8}}, DType::Int, Scalar::integer(0)});
    a.set({2}, Scalar::integer(3));
    a.set({5}, Scalar::integer(1));
    a.set({6}, Scalar::integer(2));
    seed.put(a);
    auto with = [&](const std::string& op) {
        std::string text = tmpl;
        text.replace(text.find("OP"), 2, op);
        return run_text(text, seed).find("Z")->get({});
    };
    CHECK(with("min") == Scalar::integer(1));
    CHECK(with("any") == Scalar::integer(3));
    CHECK(with("add") == Scalar::integer(6));
    seed.put(Tensor(TensorDecl{"A", {{"S", 8}}, DType::Int, Scalar::integer(0)}));
    CHECK(with("min") == Scalar::integer(0));
}

TEST_CASE("populate fold steps")
{
    const char* text = R"(tensors {
  A[D=8]: int, empty=0;
  Y[D=8]: int, empty=0;
}
init {
  A = user;
}
einsum {
  Y[d*] = A[d] :: populate(d*; pass; maxval(3));
}
)";
    Store seed;
    Tensor a(TensorDecl{"A", {{"D", 8}}, DType::Int, Scalar::integer(0)});
    for (auto [c, v] : std::vector<std::pair<int64_t, int64_t>>{{0, 5}, {1, 2}, {3, 7}, {4, 6}, {5, 6}, {7, 1}})
        a.set({c}, Scalar::integer(v));
    seed.put(a);
    std::vector<size_t> sizes;
    std::vector<int64_t> incoming;
    RunOptions opt;
    opt.populate_observer = [&](const PopulateStep& s) {
        sizes.push_back(s.fiber.size());
        incoming.push_back(s.incoming.coord);
    };
    Store out = run_text(text, seed, opt);
    CHECK(ints(out.find("Y")) == std::map<Point, int64_t>{{{3}, 7}, {{4}, 6}, {{5}, 6}});
    CHECK(sizes == std::vector<size_t>{1, 2, 3, 3, 3, 3});
    CHECK(incoming == std::vector<int64_t>{0, 1, 3, 4, 5, 7});
}

TEST_CASE("populate picks the minimum neighbor and the largest neighbor id")
{
    Graph g{4, {{0, 1, 5}, {0, 2, 3}, {0, 3, 9}, {2, 1, 4}, {2, 3, 4}}};
    for (auto [name, want] : std::vector<std::pair<std::string, std::map<Point, int64_t>>>{
             {"min_neighbor", {{{0, 2}, 3}, {{2, 1}, 4}}},
             {"max_neighbor_id", {{{0, 3}, 9}, {{2, 3}, 4}}},
         }) {
        const auto& np = stdlib::get_program(name);
        ast::Program p = np.parse();
        Store s = run(p, stdlib::graph_seed(np, p, g, {0}));
        CHECK_MESSAGE(ints(s.find("W")) == want, name);
    }
}

TEST_CASE("shift boundary")
{
    ast::Program p = stdlib::get_program("shift").parse();
    Store seed;
    seed.params["M"] = 4;
    Tensor a(resolve_decl(*p.find_decl("A"), seed.params));
    for (int64_t m = 0; m < 4; ++m) a.set({m}, Scalar::integer(10 + m));
    seed.put(a);
    Store s = run(p, seed);
    CHECK(ints(s.find("Z")) == std::map<Point, int64_t>{{{0}, 11}, {{1}, 12}, {{2}, 13}});
    // Changing A[0] never changes the output.
    a.set({0}, Scalar::integer(99));
    seed.put(a);
    CHECK(run(p, seed).find("Z")->equals(*s.find("Z")));
}

TEST_CASE("a constrained-out diagonal stays empty")
{
    const char* text = R"(tensors {
  A[M=5, N=5]: int, empty=0;
  Z[M=5, N=5]: int, empty=0;
}
init {
  A = user;
}
einsum {
  Z[m, n: n != m] = A[m, n];
}
)";
    Store seed;
    Tensor a(TensorDecl{"A", {{"M", 5}, {"N", 5}}, DType::Int, Scalar::integer(0)});
    for (int64_t m = 0; m < 5; ++m)
        for (int64_t n = 0; n < 5; ++n) a.set({m, n}, Scalar::integer(1 + m + n));
    seed.put(a);
    Store s = run_text(text, seed);
    for (int64_t m = 0; m < 5; ++m) CHECK_FALSE(s.find("Z")->exists({m, m}));
    CHECK(s.find("Z")->occupancy() == 20);
}

TEST_CASE("rank variables as operands")
{
    ast::Program p = stdlib::get_program("scale_by_rank").parse();
    Store seed;
    seed.params = {{"M", 3}, {"N", 2}};
    Tensor a(resolve_decl(*p.find_decl("A"), seed.params));
    a.set({0, 0}, Scalar::integer(4));
    a.set({2, 1}, Scalar::integer(5));
    seed.put(a);
    CHECK(ints(run(p, seed).find("Z")) == std::map<Point, int64_t>{{{2, 1}, 10}});
}

TEST_CASE("conv1d example")
{
    ast::Program p = stdlib::get_program("conv1d").parse();
    Store seed;
    seed.params = {{"W", 5}, {"S", 2}, {"Q", 4}};
    Tensor in(resolve_decl(*p.find_decl("I"), seed.params));
    for (int64_t w = 0; w < 5; ++w) in.set({w}, Scalar::integer(w + 1));
    Tensor f(resolve_decl(*p.find_decl("F"), seed.params));
    f.set({0}, Scalar::integer(1));
    f.set({1}, Scalar::integer(1));
    seed.put(in);
    seed.put(f);
    CHECK(ints(run(p, seed).find("Z")) == std::map<Point, int64_t>{{{0}, 3}, {{1}, 5}, {{2}, 7}, {{3}, 9}});
}

TEST_CASE("infinity arithmetic errors surface")
{
    const char* text = R"(tensors {
  A[K=2]: int, empty=0;
  B[K=2]: int, empty=0;
  Z[K=2]: int, empty=0;
}
init {
  A = user;
  B = user;
}
einsum {
  Z[k] = A[k] .1 B[k] :: map.1(k; add; cap);
}
)";
    Store seed;
    Tensor a(TensorDecl{"A", {{"K", 2}}, DType::Int, Scalar::integer(0)});
    Tensor b(TensorDecl{"B", {{"K", 2}}, DType::Int, Scalar::integer(0)});
    a.set({0}, Scalar::infinity());
    b.set({0}, Scalar::infinity(-1));
    seed.put(a);
    seed.put(b);
    CHECK_THROWS_AS(run_text(text, seed), EvalError);
}

TEST_CASE("missing bindings")
{
    ast::Program p = stdlib::get_program("bfs").parse();
    Store seed;
    seed.params["V"] = 3;
    seed.lists["id"] = {0};
    CHECK_THROWS_AS(run(p, seed), BindingError);
    Store no_param;
    no_param.lists["id"] = {0};
    CHECK_THROWS_AS(run(p, no_param), BindingError);
    Store wrong;
    wrong.params["V"] = 3;
    wrong.lists["id"] = {0};
    wrong.put(Tensor(TensorDecl{"G", {{"S", 3}}, DType::Int, Scalar::integer(0)}));
    CHECK_THROWS_AS(run(p, wrong), BindingError);
}

TEST_CASE("invalid programs are rejected before running")
{
    ast::Program p = parse_or_throw(R"(tensors {
  Z[M=4]: int, empty=0;
}
init {
}
einsum {
  Z[m] = A[m];
}
)");
    CHECK_THROWS_AS(run(p, Store{}), ValidationError);
}

TEST_CASE("stop conditions")
{
    ast::Program p = parse_or_throw(R"(tensors {
  P[I, D=4]: bool, empty=false;
}
init {
  P[0, d] = true;
}
einsum {
  P[i+1, d] = P[i, d];
  until P[i+1] == P[i];
}
)");
    Store s = run(p, Store{});
    CHECK(s.generations.at("P").size() == 2);

    Store st;
    Tensor a(TensorDecl{"P", {{"D", 4}}, DType::Bool, Scalar::boolean(false)});
    a.set({1}, Scalar::boolean(true));
    st.put_slice(1, a);
    st.put_slice(2, a);
    ast::StopCond eq{ast::StopCond::Kind::TensorEqual, {"P", "i", 1, {}}, {"P", "i", 0, {}}};
    CHECK(eval_stop(p, eq, st, {{"i", 1}}));
    a.set({2}, Scalar::boolean(true));
    st.put_slice(2, a);
    CHECK_FALSE(eval_stop(p, eq, st, {{"i", 1}}));
    ast::StopCond nnz{ast::StopCond::Kind::OccupancyZero, {"P", "i", 2, {}}, {}};
    CHECK(eval_stop(p, nnz, st, {{"i", 1}}));
}

TEST_CASE("cc nested cascade on a path")
{
    const auto& np = stdlib::get_program("cc");
    ast::Program p = np.parse();
    Graph g = stdlib::prepare_graph(np, path_graph(4));
    Store s = run(p, stdlib::graph_seed(np, p, g, {0}));
    std::set<Point> want, got;
    for (int64_t v = 0; v < 4; ++v) want.insert({v, 0});
    s.latest("P")->for_each([&](const Point& pt, const Scalar& v) {
        CHECK(v.as_bool());
        got.insert(pt);
    });
    CHECK(got == want);
    CHECK(s.generations.at("R").size() >= 2);
}

TEST_CASE("user operators are callable from programs")
{
    OperatorRegistry reg = builtin_registry();
    // Keeps every frontier vertex with an even id.
    register_user_op(reg, BinaryOp{"evenonly",
                                   [](const IterPoint& pt, const Operand& l, const Operand&) -> std::optional<Scalar> {
                                       auto d = pt.lookup("d");
                                       if (d && *d % 2 == 0) return l.value;
                                       return std::nullopt;
                                   },
                                   false, false});
    ast::Program p = parse_or_throw(R"(tensors {
  A[D=6]: int, empty=0;
  B[D=6]: int, empty=0;
  Z[D=6]: int, empty=0;
}
init {
  A = user;
  B = user;
}
einsum {
  Z[d] = A[d] .1 B[d] :: map.1(d; evenonly; left);
}
)");
    Store seed;
    Tensor a(TensorDecl{"A", {{"D", 6}}, DType::Int, Scalar::integer(0)});
    for (int64_t d = 0; d < 6; ++d) a.set({d}, Scalar::integer(d + 1));
    seed.put(a);
    seed.put(Tensor(TensorDecl{"B", {{"D", 6}}, DType::Int, Scalar::integer(0)}));
    RunOptions opt;
    opt.registry = &reg;
    CHECK(ints(run(p, seed, opt).find("Z")) == std::map<Point, int64_t>{{{0}, 1}, {{2}, 3}, {{4}, 5}});
    CHECK_THROWS_AS(run(p, seed), ValidationError);
}

TEST_CASE("element-wise power")
{
    ast::Program p = stdlib::get_program("elementwise_pow").parse();
    Store seed;
    seed.params = {{"M", 2}, {"N", 2}};
    Tensor a(resolve_decl(*p.find_decl("A"), seed.params));
    Tensor b(resolve_decl(*p.find_decl("B"), seed.params));
    a.set({0, 0}, Scalar::real(2.0));
    b.set({0, 0}, Scalar::real(3.0));
    a.set({1, 1}, Scalar::real(5.0));
    seed.put(a);
    seed.put(b);
    Store s = run(p, seed);
    CHECK(s.find("Z")->get({0, 0}).as_real() == doctest::Approx(8.0));
    CHECK(s.find("Z")->get({1, 1}).as_real() == doctest::Approx(1.0));
    // 0^0 = 1 at every point where both operands are empty.
    CHECK(s.find("Z")->get({0, 1}).as_real() == doctest::Approx(1.0));
}
