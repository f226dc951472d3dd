#pragma once

#include "edge/ast.hpp"
#include "edge/fibertree.hpp"
#include "edge/operators.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace edge {

// Generation or iteration-point guard tripped.
class LimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A required run-time binding (user tensor, list, size parameter) is missing or malformed.
class BindingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<ast::Diagnostic> d);
    std::vector<ast::Diagnostic> diagnostics;
};

struct Store {
    std::map<std::string, Tensor> tensors;                          // tensors without a generative rank
    std::map<std::string, std::map<int64_t, Tensor>> generations;  // generational tensors, by generation
    std::map<std::string, std::vector<int64_t>> lists;
    std::map<std::string, int64_t> params;

    const Tensor* find(const std::string& name) const;
    const Tensor* slice(const std::string& name, int64_t gen) const;
    // Highest stored generation, or nullptr.
    const Tensor* latest(const std::string& name) const;
    void put(Tensor t);
    void put_slice(int64_t gen, Tensor t);
};

struct PopulateStep {
    std::vector<std::string> vars;
    std::vector<int64_t> point;
    Point prefix;  // output coordinates with the mutable rank removed
    CoordItem incoming;
    std::vector<CoordItem> fiber;  // fiber contents after the step
};

struct RunOptions {
    int64_t max_generations = 100000;  // per cascade entry
    int64_t max_points = 1000000000;   // per statement
    bool evict = false;
    const OperatorRegistry* registry = nullptr;  // builtin_registry() when null
    std::function<void(const PopulateStep&)> populate_observer;
};

using GenEnv = std::map<std::string, int64_t>;

TensorDecl resolve_decl(const ast::TensorDeclAst& d, const std::map<std::string, int64_t>& params);
// The declaration of one generation slice: the generative rank removed.
TensorDecl slice_decl(const TensorDecl& d);

// Validates, desugars and runs the program. `seed` supplies user tensors, lists and size parameters.
Store run(const ast::Program& p, Store seed, const RunOptions& opt = {});

// Evaluates one assignment statement (update statements are desugared first) and returns the
// output tensor, or the output slice for generational tensors.
Tensor eval_stmt(const ast::Program& p, const ast::Statement& s, const Store& store, const GenEnv& env,
                 const RunOptions& opt = {});

bool eval_stop(const ast::Program& p, const ast::StopCond& c, const Store& store, const GenEnv& env);

}  // namespace edge
