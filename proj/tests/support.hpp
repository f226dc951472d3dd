#pragma once

#include "edge/engine.hpp"
#include "edge/oracle.hpp"
#include "edge/parser.hpp"
#include "edge/stdlib.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace edge {
inline std::ostream& operator<<(std::ostream& o, const Scalar& v) { return o << v.to_string(); }
}  // namespace edge

namespace testsupport {

using edge::oracle::Graph;

inline std::string read_text(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& s)
{
    std::ofstream out(p, std::ios::binary);
    out << s;
}

inline edge::ast::Program parse_or_throw(const std::string& text)
{
    edge::ParseResult r = edge::parse(text);
    if (!r.ok()) throw std::runtime_error(r.diagnostics.front().format());
    return std::move(*r.program);
}

// Directed graph without self loops; weights in [lo, hi].
inline Graph random_graph(std::mt19937_64& rng, int64_t n, double density, int64_t lo = 1, int64_t hi = 9)
{
    Graph g{n, {}};
    std::bernoulli_distribution keep(density);
    std::uniform_int_distribution<int64_t> w(lo, hi);
    for (int64_t s = 0; s < n; ++s)
        for (int64_t d = 0; d < n; ++d)
            if (s != d && keep(rng)) g.edges.push_back({s, d, w(rng)});
    return g;
}

// Random size in [1, 64] and density in [0.05, 0.5].
inline Graph random_spec_graph(std::mt19937_64& rng, int64_t lo = 1, int64_t hi = 9)
{
    int64_t n = std::uniform_int_distribution<int64_t>(1, 64)(rng);
    double density = std::uniform_real_distribution<double>(0.05, 0.5)(rng);
    return random_graph(rng, n, density, lo, hi);
}

inline Graph path_graph(int64_t n)
{
    Graph g{n, {}};
    for (int64_t v = 0; v + 1 < n; ++v) g.edges.push_back({v, v + 1, 1});
    return g;
}

inline Graph star_graph(int64_t n)
{
    Graph g{n, {}};
    for (int64_t v = 1; v < n; ++v) g.edges.push_back({0, v, 1});
    return g;
}

inline Graph complete_graph(int64_t n)
{
    Graph g{n, {}};
    for (int64_t s = 0; s < n; ++s)
        for (int64_t d = 0; d < n; ++d)
            if (s != d) g.edges.push_back({s, d, 1});
    return g;
}

// Two random halves with no edge between them, plus isolated vertices at the end.
inline Graph disconnected_graph(std::mt19937_64& rng, int64_t n)
{
    Graph g{n, {}};
    int64_t half = n / 2;
    std::bernoulli_distribution keep(0.3);
    for (int64_t s = 0; s < n - 2; ++s)
        for (int64_t d = 0; d < n - 2; ++d)
            if (s != d && (s < half) == (d < half) && keep(rng)) g.edges.push_back({s, d, 1});
    return g;
}

// Every source row gets distinct weights, so its minimum is unique.
inline Graph unique_min_graph(std::mt19937_64& rng, int64_t n, double density)
{
    Graph g = random_graph(rng, n, density);
    std::map<int64_t, int64_t> next;
    for (auto& e : g.edges) e.weight = std::uniform_int_distribution<int64_t>(1, 4)(rng) + 5 * next[e.src]++;
    return g;
}

inline std::vector<int64_t> random_sources(std::mt19937_64& rng, int64_t n, int64_t count)
{
    std::vector<int64_t> out;
    std::uniform_int_distribution<int64_t> pick(0, n - 1);
    while (static_cast<int64_t>(out.size()) < std::min(count, n)) {
        int64_t v = pick(rng);
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    return out;
}

inline edge::Scalar random_value(std::mt19937_64& rng, edge::DType t, const edge::Scalar& empty)
{
    for (;;) {
        edge::Scalar v;
        switch (t) {
        case edge::DType::Int: v = edge::Scalar::integer(std::uniform_int_distribution<int64_t>(-9, 9)(rng)); break;
        case edge::DType::Real: v = edge::Scalar::real(static_cast<double>(std::uniform_int_distribution<int>(0, 4)(rng))); break;
        case edge::DType::Bool: v = edge::Scalar::boolean(std::bernoulli_distribution(0.5)(rng)); break;
        }
        if (!(v == empty)) return v;
    }
}

inline edge::Tensor random_tensor(std::mt19937_64& rng, const edge::TensorDecl& d, double density)
{
    edge::Tensor t(d);
    std::bernoulli_distribution keep(density);
    edge::Point p(d.ranks.size(), 0);
    std::function<void(size_t)> fill = [&](size_t r) {
        if (r == d.ranks.size()) {
            if (keep(rng)) t.set(p, random_value(rng, d.dtype, d.empty));
            return;
        }
        for (int64_t c = 0; c < *d.ranks[r].shape; ++c) {
            p[r] = c;
            fill(r + 1);
        }
    };
    fill(0);
    return t;
}

inline std::string store_dump(const edge::Store& s)
{
    std::string out;
    for (const auto& [n, t] : s.tensors) {
        out += "tensor " + n + "\n";
        for (const auto& [p, v] : t.nonempty()) {
            for (auto c : p) out += std::to_string(c) + " ";
            out += v.to_string() + "\n";
        }
    }
    for (const auto& [n, gens] : s.generations)
        for (const auto& [g, t] : gens) {
            out += "slice " + n + "@" + std::to_string(g) + "\n";
            for (const auto& [p, v] : t.nonempty()) {
                for (auto c : p) out += std::to_string(c) + " ";
                out += v.to_string() + "\n";
            }
        }
    return out;
}

// True when every tensor of the program's declarations agrees between the two stores.
inline bool same_results(const edge::ast::Program& p, const edge::Store& a, const edge::Store& b, std::string* why = nullptr)
{
    for (const auto& d : p.decls) {
        if (d.generative()) {
            auto ia = a.generations.find(d.name), ib = b.generations.find(d.name);
            std::map<int64_t, edge::Tensor> none;
            const auto& ga = ia == a.generations.end() ? none : ia->second;
            const auto& gb = ib == b.generations.end() ? none : ib->second;
            std::set<int64_t> gens;
            for (const auto& [g, t] : ga) gens.insert(g);
            for (const auto& [g, t] : gb) gens.insert(g);
            for (int64_t g : gens) {
                auto x = ga.find(g), y = gb.find(g);
                size_t ox = x == ga.end() ? 0 : x->second.occupancy();
                size_t oy = y == gb.end() ? 0 : y->second.occupancy();
                bool eq = (x == ga.end() || y == gb.end()) ? ox == 0 && oy == 0 : x->second.equals(y->second);
                if (!eq) {
                    if (why) *why = d.name + "@" + std::to_string(g);
                    return false;
                }
            }
        } else {
            const edge::Tensor* x = a.find(d.name);
            const edge::Tensor* y = b.find(d.name);
            bool eq = (!x || !y) ? (!x || x->occupancy() == 0) && (!y || y->occupancy() == 0) : x->equals(*y);
            if (!eq) {
                if (why) *why = d.name;
                return false;
            }
        }
    }
    return true;
}

}  // namespace testsupport
