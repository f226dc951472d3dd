#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support.hpp"

#include "edge/io.hpp"

#include <random>
#include <sstream>

using namespace edge;

namespace {

io::LoadedMatrix mm(const std::string& text, io::MatrixMarketOptions opt = {})
{
    std::istringstream in(text);
    return io::read_matrix_market(in, opt, "t.mtx");
}

std::map<Point, std::string> entries(const Tensor& t)
{
    std::map<Point, std::string> m;
    t.for_each([&](const Point& p, const Scalar& v) { m[p] = v.to_string(); });
    return m;
}

}  // namespace

TEST_CASE("pattern files shift to zero-based indices")
{
    auto m = mm("%%MatrixMarket matrix coordinate pattern general\n% comment\n3 3 2\n1 2\n2 3\n");
    CHECK(m.vertices == 3);
    CHECK(entries(m.tensor) == std::map<Point, std::string>{{{0, 1}, "1"}, {{1, 2}, "1"}});
}

TEST_CASE("symmetric storage mirrors entries")
{
    auto m = mm("%%MatrixMarket matrix coordinate integer symmetric\n3 3 1\n2 1 4\n");
    CHECK(entries(m.tensor) == std::map<Point, std::string>{{{0, 1}, "4"}, {{1, 0}, "4"}});
    auto s = mm("%%MatrixMarket matrix coordinate integer general\n3 3 1\n2 1 4\n", {true});
    CHECK(entries(s.tensor) == entries(m.tensor));
}

TEST_CASE("real values into int tensors must be integral")
{
    CHECK_THROWS_AS(mm("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 2.5\n"), io::FormatError);
    auto ok = mm("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 2.0\n");
    CHECK(ok.tensor.get({0, 1}) == Scalar::integer(2));
    io::MatrixMarketOptions real;
    real.dtype = DType::Real;
    CHECK(mm("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 2.5\n", real).tensor.get({0, 1}) ==
          Scalar::real(2.5));
}

TEST_CASE("duplicates are summed")
{
    auto m = mm("%%MatrixMarket matrix coordinate integer general\n2 2 2\n1 2 3\n1 2 4\n");
    CHECK(m.tensor.get({0, 1}) == Scalar::integer(7));
}

TEST_CASE("malformed files report their line")
{
    try {
        mm("%%MatrixMarket matrix coordinate integer general\n2 2 2\n1 2 3\n5 1 1\n");
        FAIL("expected an error");
    } catch (const io::FormatError& e) {
        CHECK(std::string(e.what()).find("t.mtx:4:") == 0);
    }
    CHECK_THROWS_AS(mm("%%MatrixMarket matrix array integer general\n2 2\n"), io::FormatError);
    CHECK_THROWS_AS(mm("not a header\n"), io::FormatError);
    CHECK_THROWS_AS(mm("%%MatrixMarket matrix coordinate integer general\n2 2 3\n1 2 3\n"), io::FormatError);
    CHECK_THROWS_AS(mm("%%MatrixMarket matrix coordinate integer general\n2 2 1\n1 x 3\n"), io::FormatError);
    CHECK_THROWS_AS(io::load_matrix_market("/nonexistent/graph.mtx"), io::IoError);
}

TEST_CASE("id lists")
{
    CHECK(io::parse_id_list("0,4,7").ids == std::vector<int64_t>{0, 4, 7});
    auto d = io::parse_id_list("3 3");
    CHECK(d.ids == std::vector<int64_t>{3});
    CHECK(d.warnings.size() == 1);
    CHECK_THROWS_AS(io::parse_id_list(""), io::FormatError);
    CHECK_THROWS_AS(io::parse_id_list("1,-2"), io::FormatError);
    CHECK_THROWS_AS(io::parse_id_list("1.5"), io::FormatError);
    auto path = std::filesystem::temp_directory_path() / "edge_ids_test.txt";
    testsupport::write_text(path, "5\n2, 9\n");
    CHECK(io::load_id_list("@" + path.string()).ids == std::vector<int64_t>{5, 2, 9});
    std::filesystem::remove(path);
    CHECK_THROWS_AS(io::load_id_list("@/nonexistent/ids"), io::IoError);
}

TEST_CASE("dump format")
{
    Tensor f(TensorDecl{"F", {{"S", 4}}, DType::Int, Scalar::infinity()});
    CHECK(io::dump_string(f) == "# F ranks=S shape=4 dtype=int empty=inf\n");
    f.set({1}, Scalar::integer(0));
    f.set({3}, Scalar::infinity(-1));
    CHECK(io::dump_string(f) == "# F ranks=S shape=4 dtype=int empty=inf\nF 1 0\nF 3 -inf\n");
    Tensor p(TensorDecl{"P", {{"D", 2}}, DType::Bool, Scalar::boolean(false)});
    p.set({0}, Scalar::boolean(true));
    CHECK(io::dump_string(p) == "# P ranks=D shape=2 dtype=bool empty=false\nP 0 true\n");
}

TEST_CASE("dump round trip and injectivity")
{
    std::mt19937_64 rng(41);
    std::map<std::string, std::map<Point, std::string>> seen;
    for (int round = 0; round < 300; ++round) {
        DType t = static_cast<DType>(rng() % 3);
        Scalar empty = t == DType::Int ? Scalar::integer(0) : t == DType::Real ? Scalar::real(0.0) : Scalar::boolean(false);
        TensorDecl d{"T", {{"A", 3}, {"B", 4}}, t, empty};
        Tensor x = testsupport::random_tensor(rng, d, 0.3);
        std::string text = io::dump_string(x);
        Tensor y = io::parse_dump(text);
        CHECK(y.equals(x));
        CHECK(io::dump_header(y) == io::dump_header(x));
        CHECK(io::dump_string(y) == text);
        auto [it, fresh] = seen.emplace(text, entries(x));
        if (!fresh) CHECK(it->second == entries(x));
    }
}

TEST_CASE("malformed dumps")
{
    CHECK_THROWS_AS(io::parse_dump("T 0 1\n"), io::FormatError);
    CHECK_THROWS_AS(io::parse_dump("# T ranks=A shape=3 dtype=int empty=0\nT 5 1\n"), io::FormatError);
    CHECK_THROWS_AS(io::parse_dump("# T ranks=A shape=3 dtype=int empty=0\nT 1\n"), io::FormatError);
    CHECK_THROWS_AS(io::parse_dump(""), io::FormatError);
}

TEST_CASE("property: symmetrized loads equal their transpose")
{
    std::mt19937_64 rng(42);
    for (int round = 0; round < 100; ++round) {
        int64_t n = std::uniform_int_distribution<int64_t>(1, 12)(rng);
        std::string body;
        int count = 0;
        for (int64_t r = 1; r <= n; ++r)
            for (int64_t c = 1; c <= n; ++c)
                if (std::bernoulli_distribution(0.2)(rng)) {
                    body += std::to_string(r) + " " + std::to_string(c) + " " + std::to_string(rng() % 9 + 1) + "\n";
                    ++count;
                }
        io::MatrixMarketOptions opt;
        opt.symmetrize = true;
        opt.dtype = DType::Bool;
        auto m = mm("%%MatrixMarket matrix coordinate integer general\n" + std::to_string(n) + " " + std::to_string(n) +
                        " " + std::to_string(count) + "\n" + body,
                    opt);
        CHECK(m.tensor.swizzle({1, 0}).equals(m.tensor));
    }
}
