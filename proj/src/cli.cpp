#include "edge/cli.hpp"

#include "edge/engine.hpp"
#include "edge/io.hpp"
#include "edge/parser.hpp"
#include "edge/stdlib.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace edge::cli {

namespace {

// Carries an exit code out of nested helpers.
struct Abort {
    int code;
    std::string message;
};

struct Loaded {
    ast::Program program;
    const stdlib::NamedProgram* builtin = nullptr;
};

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Abort{Io, "error: cannot read " + path};
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Loaded load_program(const std::string& path, const std::string& builtin)
{
    if (path.empty() == builtin.empty()) throw Abort{Usage, "error: give exactly one of a program path or --builtin"};
    Loaded l;
    std::string text, file;
    if (!builtin.empty()) {
        try {
            l.builtin = &stdlib::get_program(builtin);
        } catch (const std::invalid_argument& e) {
            throw Abort{Usage, std::string("error: ") + e.what()};
        }
        text = l.builtin->source;
        file = builtin + ".edge";
    } else {
        text = read_file(path);
        file = path;
    }
    ParseResult r = parse(text, file);
    if (!r.ok()) {
        std::string msg;
        for (const auto& d : r.diagnostics) msg += (msg.empty() ? "" : "\n") + d.format();
        throw Abort{Usage, msg};
    }
    auto diags = ast::validate(*r.program);
    if (!diags.empty()) {
        std::string msg;
        for (const auto& d : diags) msg += (msg.empty() ? "" : "\n") + d.format();
        throw Abort{Usage, msg};
    }
    l.program = std::move(*r.program);
    return l;
}

int64_t max_generations(int64_t flag)
{
    if (flag > 0) return flag;
    if (const char* env = std::getenv("EDGE_MAX_GENERATIONS")) {
        auto v = Scalar::parse(env, DType::Int);
        if (!v || v->is_inf() || v->as_int() <= 0)
            throw Abort{Usage, std::string("error: EDGE_MAX_GENERATIONS must be a positive integer, got '") + env + "'"};
        return v->as_int();
    }
    return RunOptions{}.max_generations;
}

std::vector<int64_t> sources_of(const std::string& arg, std::ostream& err)
{
    try {
        io::IdList l = io::load_id_list(arg);
        for (const auto& w : l.warnings) err << "warning: " << w << "\n";
        return l.ids;
    } catch (const io::IoError& e) {
        throw Abort{Io, std::string("error: ") + e.what()};
    } catch (const io::FormatError& e) {
        throw Abort{Usage, std::string("error: --sources: ") + e.what()};
    }
}

io::LoadedMatrix load_graph(const std::string& path, const io::MatrixMarketOptions& opt)
{
    try {
        return io::load_matrix_market(path, opt);
    } catch (const io::IoError& e) {
        throw Abort{Io, std::string("error: ") + e.what()};
    } catch (const io::FormatError& e) {
        throw Abort{Io, std::string("error: ") + e.what()};
    }
}

std::pair<std::string, std::string> split_binding(const std::string& s, const std::string& flag)
{
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw Abort{Usage, "error: " + flag + " expects NAME=VALUE, got '" + s + "'"};
    std::string name = s.substr(0, eq);
    if (name.size() >= 2 && name.front() == '|' && name.back() == '|') name = name.substr(1, name.size() - 2);
    return {name, s.substr(eq + 1)};
}

std::vector<std::string> split_names(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string x; std::getline(ss, x, ',');)
        if (!x.empty()) out.push_back(x);
    return out;
}

// The full tensor of a declaration: generational tensors carry the generation as the first coordinate.
Tensor gather(const ast::TensorDeclAst& d, const Store& s)
{
    TensorDecl full = resolve_decl(d, s.params);
    Tensor t(full);
    if (full.generative()) {
        auto it = s.generations.find(d.name);
        if (it != s.generations.end())
            for (const auto& [g, slice] : it->second)
                slice.for_each([&](const Point& p, const Scalar& v) {
                    Point q{g};
                    q.insert(q.end(), p.begin(), p.end());
                    t.set(q, v);
                });
    } else if (const Tensor* st = s.find(d.name)) {
        st->for_each([&](const Point& p, const Scalar& v) { t.set(p, v); });
    }
    return t;
}

int run_guarded(std::ostream& err, const std::function<int()>& body)
{
    try {
        return body();
    } catch (const Abort& a) {
        if (!a.message.empty()) err << a.message << "\n";
        return a.code;
    } catch (const ValidationError& e) {
        for (const auto& d : e.diagnostics) err << d.format() << "\n";
        return Usage;
    } catch (const BindingError& e) {
        err << "error: " << e.what() << "\n";
        return Usage;
    } catch (const LimitError& e) {
        err << "error: " << e.what() << "\n";
        return Runtime;
    } catch (const io::IoError& e) {
        err << "error: " << e.what() << "\n";
        return Io;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return Runtime;
    }
}

struct RunArgs {
    std::string path, builtin, graph, sources = "0", dump, out;
    std::vector<std::string> params, inputs;
    int64_t max_iters = 0;
};

int cmd_check(const std::string& path, std::ostream& out)
{
    load_program(path, "");
    out << path << ": ok\n";
    return Ok;
}

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err)
{
    Loaded l = load_program(a.path, a.builtin);
    const ast::Program& p = l.program;
    Store seed;
    for (const auto& s : a.params) {
        auto [name, value] = split_binding(s, "--param");
        auto v = Scalar::parse(value, DType::Int);
        if (!v || v->is_inf() || v->as_int() <= 0)
            throw Abort{Usage, "error: --param " + name + " needs a positive integer, got '" + value + "'"};
        seed.params[name] = v->as_int();
    }
    std::vector<std::string> dumps = split_names(a.dump);
    for (const auto& d : dumps)
        if (!p.find_decl(d)) throw Abort{Usage, "error: --dump names unknown tensor " + d};

    std::map<std::string, std::string> inputs;
    for (const auto& s : a.inputs) {
        auto [name, path] = split_binding(s, "--input");
        inputs[name] = path;
    }
    std::vector<std::string> users = ast::user_tensors(p);
    for (const auto& [name, path] : inputs)
        if (std::find(users.begin(), users.end(), name) == users.end())
            throw Abort{Usage, "error: --input names " + name + ", which is not a user tensor"};
    for (const auto& u : users) {
        if (inputs.count(u)) {
            std::ifstream in(inputs[u]);
            if (!in) throw Abort{Io, "error: cannot read " + inputs[u]};
            std::vector<Tensor> ts;
            try {
                ts = io::parse_dumps(in);
            } catch (const io::FormatError& e) {
                throw Abort{Io, std::string("error: ") + inputs[u] + ": " + e.what()};
            }
            auto it = std::find_if(ts.begin(), ts.end(), [&](const Tensor& t) { return t.name() == u; });
            if (it == ts.end()) throw Abort{Usage, "error: " + inputs[u] + " holds no tensor named " + u};
            seed.put(std::move(*it));
        }
    }
    int64_t vertices = 0;
    if (!a.graph.empty()) {
        for (const auto& u : users) {
            if (inputs.count(u)) continue;
            const ast::TensorDeclAst* d = p.find_decl(u);
            if (!d || d->ranks.size() != 2) continue;
            io::MatrixMarketOptions mo;
            mo.dtype = d->dtype;
            mo.empty = d->empty;
            mo.name = u;
            mo.symmetrize = l.builtin && l.builtin->undirected;
            io::LoadedMatrix m = load_graph(a.graph, mo);
            vertices = m.vertices;
            Tensor t = std::move(m.tensor);
            if (l.builtin && l.builtin->weights == stdlib::Weights::Unit && d->dtype != DType::Bool) {
                Tensor unit(t.decl());
                Scalar one = d->dtype == DType::Int ? Scalar::integer(1) : Scalar::real(1.0);
                t.for_each([&](const Point& pt, const Scalar&) { unit.set(pt, one); });
                t = std::move(unit);
            }
            seed.put(std::move(t));
        }
        if (vertices == 0) {
            io::MatrixMarketOptions mo;
            vertices = load_graph(a.graph, mo).vertices;
        }
    }
    for (const auto& prm : ast::size_params(p)) {
        if (seed.params.count(prm)) continue;
        if (vertices <= 0) throw Abort{Usage, "error: size parameter |" + prm + "| is not bound (use --param or --graph)"};
        seed.params[prm] = vertices;
    }
    auto lists = ast::list_names(p);
    if (!lists.empty()) {
        std::vector<int64_t> ids = sources_of(a.sources, err);
        for (const auto& name : lists) seed.lists[name] = ids;
    }
    for (const auto& u : users)
        if (!seed.find(u)) throw Abort{Usage, "error: user tensor " + u + " is not bound (use --graph or --input)"};

    RunOptions opt;
    opt.max_generations = max_generations(a.max_iters);
    Store result = run(p, std::move(seed), opt);

    std::ostringstream text;
    if (dumps.empty())
        for (const auto& d : p.decls) dumps.push_back(d.name);
    for (const auto& name : dumps) io::dump_tensor(gather(*p.find_decl(name), result), text);
    if (a.out.empty()) {
        out << text.str();
    } else {
        std::ofstream f(a.out, std::ios::binary);
        if (!f) throw Abort{Io, "error: cannot write " + a.out};
        f << text.str();
        if (!f) throw Abort{Io, "error: write failure on " + a.out};
    }
    return Ok;
}

int cmd_verify(const RunArgs& a, std::ostream& out, std::ostream& err)
{
    if (a.builtin.empty()) throw Abort{Usage, "error: verify needs --builtin"};
    if (a.graph.empty()) throw Abort{Usage, "error: verify needs --graph"};
    const stdlib::NamedProgram* np;
    try {
        np = &stdlib::get_program(a.builtin);
    } catch (const std::invalid_argument& e) {
        throw Abort{Usage, std::string("error: ") + e.what()};
    }
    if (!np->graph_program()) throw Abort{Usage, "error: program " + np->name + " has no oracle pairing"};
    io::MatrixMarketOptions mo;
    io::LoadedMatrix m = load_graph(a.graph, mo);
    oracle::Graph g = oracle::from_tensor(m.tensor);
    g.vertices = m.vertices;
    std::vector<int64_t> ids = sources_of(a.sources, err);
    for (int64_t s : ids)
        if (s >= g.vertices) throw Abort{Usage, "error: source " + std::to_string(s) + " is not a vertex"};
    RunOptions opt;
    opt.max_generations = max_generations(a.max_iters);
    stdlib::VerifyResult r = stdlib::verify(*np, g, ids, opt);
    if (r.pass) {
        out << "PASS " << np->name << "\n";
        return Ok;
    }
    err << "FAIL " << np->name << ": " << r.message << "\n";
    return Mismatch;
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"EDGE reference interpreter", "edge"};
    app.require_subcommand(1);
    std::string check_path;
    RunArgs ra, va;

    auto* check = app.add_subcommand("check", "parse and validate a program");
    check->add_option("program", check_path, "program file")->required();

    auto* run_cmd = app.add_subcommand("run", "run a program and dump tensors");
    run_cmd->add_option("program", ra.path, "program file");
    run_cmd->add_option("--builtin", ra.builtin, "bundled program name");
    run_cmd->add_option("--graph", ra.graph, "MatrixMarket graph");
    run_cmd->add_option("--sources", ra.sources, "source vertices: inline list or @file");
    run_cmd->add_option("--param", ra.params, "size parameter NAME=V")->take_all()->allow_extra_args(false);
    run_cmd->add_option("--max-iters", ra.max_iters, "generation limit per cascade");
    run_cmd->add_option("--dump", ra.dump, "comma-separated tensors to dump");
    run_cmd->add_option("--out", ra.out, "write dumps to a file");
    run_cmd->add_option("--input", ra.inputs, "user tensor NAME=dump-file")->allow_extra_args(false);

    auto* verify_cmd = app.add_subcommand("verify", "run a bundled program against its oracle");
    verify_cmd->add_option("--builtin", va.builtin, "bundled program name");
    verify_cmd->add_option("--graph", va.graph, "MatrixMarket graph");
    verify_cmd->add_option("--sources", va.sources, "source vertices: inline list or @file");
    verify_cmd->add_option("--max-iters", va.max_iters, "generation limit per cascade");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Ok;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return Ok;
        }
        err << "error: " << e.what() << "\n";
        return Usage;
    }
    if (*check) return run_guarded(err, [&] { return cmd_check(check_path, out); });
    if (*run_cmd) return run_guarded(err, [&] { return cmd_run(ra, out, err); });
    return run_guarded(err, [&] { return cmd_verify(va, out, err); });
}

}  // namespace edge::cli
