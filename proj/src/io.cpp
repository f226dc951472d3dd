#include "edge/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace edge::io {

namespace {

std::vector<std::string> words(const std::string& line)
{
    std::istringstream ss(line);
    std::vector<std::string> out;
    for (std::string w; ss >> w;) out.push_back(w);
    return out;
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool parse_int(const std::string& s, int64_t& out)
{
    std::optional<Scalar> v = Scalar::parse(s, DType::Int);
    if (!v || v->is_inf()) return false;
    out = v->as_int();
    return true;
}

Scalar zero_of(DType t)
{
    return t == DType::Int ? Scalar::integer(0) : t == DType::Real ? Scalar::real(0.0) : Scalar::boolean(false);
}

Scalar add_values(const Scalar& a, const Scalar& b)
{
    switch (a.type()) {
    case DType::Bool: return Scalar::boolean(a.as_bool() || b.as_bool());
    case DType::Real: return Scalar::real(a.as_real() + b.as_real());
    case DType::Int: {
        int64_t r;
        if (__builtin_add_overflow(a.as_int(), b.as_int(), &r)) throw FormatError("summed duplicate weights overflow int");
        return Scalar::integer(r);
    }
    }
    return a;
}

}  // namespace

LoadedMatrix read_matrix_market(std::istream& in, const MatrixMarketOptions& opt, const std::string& source)
{
    auto fail = [&](size_t line, const std::string& msg) {
        return FormatError(source + ":" + std::to_string(line) + ": " + msg);
    };
    std::string line;
    size_t ln = 0;
    if (!std::getline(in, line)) throw fail(1, "empty file, expected a %%MatrixMarket header");
    ++ln;
    auto h = words(line);
    if (h.size() != 5 || h[0] != "%%MatrixMarket" || lower(h[1]) != "matrix")
        throw fail(ln, "malformed header, expected '%%MatrixMarket matrix coordinate <field> <symmetry>'");
    std::string format = lower(h[2]), field = lower(h[3]), symmetry = lower(h[4]);
    if (format != "coordinate") throw fail(ln, "only coordinate format is supported, got '" + h[2] + "'");
    if (field != "real" && field != "integer" && field != "pattern")
        throw fail(ln, "unsupported field '" + h[3] + "'");
    if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric")
        throw fail(ln, "unsupported symmetry '" + h[4] + "'");
    if (field == "real" && opt.dtype == DType::Bool)
        throw fail(ln, "real-valued file cannot load into a bool tensor");

    int64_t rows = -1, cols = -1, nnz = -1;
    while (std::getline(in, line)) {
        ++ln;
        auto w = words(line);
        if (w.empty() || w[0][0] == '%') continue;
        if (w.size() != 3 || !parse_int(w[0], rows) || !parse_int(w[1], cols) || !parse_int(w[2], nnz) || rows < 0 ||
            cols < 0 || nnz < 0)
            throw fail(ln, "malformed size line, expected 'rows cols entries'");
        break;
    }
    if (nnz < 0) throw fail(ln, "missing size line");

    int64_t n = std::max(rows, cols);
    Scalar empty = opt.empty.value_or(zero_of(opt.dtype));
    std::map<std::pair<int64_t, int64_t>, Scalar> acc;
    auto put = [&](int64_t r, int64_t c, const Scalar& v) {
        auto [it, fresh] = acc.emplace(std::make_pair(r, c), v);
        if (!fresh) it->second = add_values(it->second, v);
    };
    int64_t seen = 0;
    while (seen < nnz && std::getline(in, line)) {
        ++ln;
        auto w = words(line);
        if (w.empty() || w[0][0] == '%') continue;
        size_t want = field == "pattern" ? 2 : 3;
        if (w.size() != want) throw fail(ln, "expected " + std::to_string(want) + " fields per entry");
        int64_t r, c;
        if (!parse_int(w[0], r) || !parse_int(w[1], c)) throw fail(ln, "malformed index");
        if (r < 1 || r > rows || c < 1 || c > cols)
            throw fail(ln, "index (" + w[0] + ", " + w[1] + ") outside the declared " + std::to_string(rows) + "x" +
                               std::to_string(cols) + " bounds");
        Scalar v;
        if (field == "pattern") {
            v = opt.dtype == DType::Bool ? Scalar::boolean(true)
                : opt.dtype == DType::Int ? Scalar::integer(1)
                                          : Scalar::real(1.0);
        } else if (field == "integer") {
            int64_t x;
            if (!parse_int(w[2], x)) throw fail(ln, "malformed integer value '" + w[2] + "'");
            v = opt.dtype == DType::Bool ? Scalar::boolean(x != 0)
                : opt.dtype == DType::Int ? Scalar::integer(x)
                                          : Scalar::real(static_cast<double>(x));
        } else {
            auto x = Scalar::parse(w[2], DType::Real);
            if (!x) throw fail(ln, "malformed real value '" + w[2] + "'");
            double d = x->as_real();
            if (opt.dtype == DType::Int) {
                if (!std::isfinite(d) || std::trunc(d) != d || std::fabs(d) > 9.0e18)
                    throw fail(ln, "value " + w[2] + " does not fit an int tensor (dtype mismatch)");
                v = Scalar::integer(static_cast<int64_t>(d));
            } else {
                v = *x;
            }
        }
        r -= 1;
        c -= 1;
        put(r, c, v);
        if (r != c && (symmetry != "general" || opt.symmetrize)) {
            Scalar mirrored = v;
            if (symmetry == "skew-symmetric") {
                if (v.type() == DType::Int) mirrored = Scalar::integer(-v.as_int());
                else if (v.type() == DType::Real) mirrored = Scalar::real(-v.as_real());
            }
            put(c, r, mirrored);
        }
        ++seen;
    }
    if (seen < nnz)
        throw fail(ln, "expected " + std::to_string(nnz) + " entries, found " + std::to_string(seen));

    Tensor t(TensorDecl{opt.name, {{"S", n}, {"D", n}}, opt.dtype, empty});
    for (const auto& [rc, v] : acc) t.set({rc.first, rc.second}, v);
    return LoadedMatrix{std::move(t), rows, cols, n};
}

LoadedMatrix load_matrix_market(const std::string& path, const MatrixMarketOptions& opt)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_matrix_market(in, opt, path);
}

IdList parse_id_list(std::string_view text)
{
    IdList out;
    std::string tok;
    auto flush = [&] {
        if (tok.empty()) return;
        int64_t v;
        if (!parse_int(tok, v) || v < 0) throw FormatError("invalid vertex id '" + tok + "'");
        if (std::find(out.ids.begin(), out.ids.end(), v) != out.ids.end())
            out.warnings.push_back("duplicate vertex id " + tok + " ignored");
        else
            out.ids.push_back(v);
        tok.clear();
    };
    for (char c : text) {
        if (c == ',' || std::isspace(static_cast<unsigned char>(c))) flush();
        else tok += c;
    }
    flush();
    if (out.ids.empty()) throw FormatError("empty vertex id list");
    return out;
}

IdList load_id_list(const std::string& arg)
{
    if (arg.empty() || arg[0] != '@') return parse_id_list(arg);
    std::ifstream in(arg.substr(1));
    if (!in) throw IoError("cannot open " + arg.substr(1));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_id_list(ss.str());
}

std::string dump_header(const Tensor& t)
{
    std::string ranks, shape;
    for (const auto& r : t.decl().ranks) {
        if (!ranks.empty()) {
            ranks += ",";
            shape += ",";
        }
        ranks += r.name;
        shape += r.shape ? std::to_string(*r.shape) : "*";
    }
    return "# " + t.name() + " ranks=" + ranks + " shape=" + shape + " dtype=" + std::string(dtype_name(t.dtype())) +
           " empty=" + t.empty_value().to_string();
}

void dump_tensor(const Tensor& t, std::ostream& out)
{
    out << dump_header(t) << '\n';
    t.for_each([&](const Point& p, const Scalar& v) {
        out << t.name();
        for (int64_t c : p) out << ' ' << c;
        out << ' ' << v.to_string() << '\n';
    });
    if (!out) throw IoError("write failure while dumping " + t.name());
}

std::string dump_string(const Tensor& t)
{
    std::ostringstream ss;
    dump_tensor(t, ss);
    return ss.str();
}

std::vector<Tensor> parse_dumps(std::istream& in)
{
    std::vector<Tensor> out;
    std::string line;
    size_t ln = 0;
    auto fail = [&](const std::string& msg) { return FormatError("dump line " + std::to_string(ln) + ": " + msg); };
    while (std::getline(in, line)) {
        ++ln;
        auto w = words(line);
        if (w.empty()) continue;
        if (w[0] == "#") {
            if (w.size() != 6) throw fail("malformed header");
            auto field = [&](size_t i, const std::string& key) {
                if (w[i].rfind(key + "=", 0) != 0) throw fail("expected " + key + "=");
                return w[i].substr(key.size() + 1);
            };
            TensorDecl d;
            d.name = w[1];
            std::string ranks = field(2, "ranks"), shape = field(3, "shape");
            auto dt = parse_dtype(field(4, "dtype"));
            if (!dt) throw fail("unknown dtype");
            d.dtype = *dt;
            auto e = Scalar::parse(field(5, "empty"), d.dtype);
            if (!e) throw fail("malformed empty value");
            d.empty = *e;
            auto split = [](const std::string& s) {
                std::vector<std::string> parts;
                if (s.empty()) return parts;
                std::stringstream ss(s);
                for (std::string x; std::getline(ss, x, ',');) parts.push_back(x);
                return parts;
            };
            auto rn = split(ranks), sh = split(shape);
            if (rn.size() != sh.size()) throw fail("ranks and shape lengths differ");
            for (size_t i = 0; i < rn.size(); ++i) {
                RankDecl r{rn[i], std::nullopt};
                if (sh[i] != "*") {
                    int64_t v;
                    if (!parse_int(sh[i], v)) throw fail("malformed shape");
                    r.shape = v;
                }
                d.ranks.push_back(r);
            }
            try {
                out.emplace_back(d);
            } catch (const std::exception& ex) {
                throw fail(ex.what());
            }
            continue;
        }
        if (out.empty() || w[0] != out.back().name()) throw fail("entry without a matching header");
        Tensor& t = out.back();
        if (w.size() != t.rank_count() + 2) throw fail("wrong number of fields");
        Point p;
        for (size_t i = 1; i + 1 < w.size(); ++i) {
            int64_t c;
            if (!parse_int(w[i], c)) throw fail("malformed coordinate");
            p.push_back(c);
        }
        auto v = Scalar::parse(w.back(), t.dtype());
        if (!v) throw fail("malformed value");
        try {
            t.set(p, *v);
        } catch (const std::exception& ex) {
            throw fail(ex.what());
        }
    }
    return out;
}

Tensor parse_dump(std::string_view text)
{
    std::istringstream ss{std::string(text)};
    auto all = parse_dumps(ss);
    if (all.size() != 1) throw FormatError("expected exactly one tensor in the dump");
    return std::move(all.front());
}

}  // namespace edge::io
