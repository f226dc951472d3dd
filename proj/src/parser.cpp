#include "edge/parser.hpp"

#include <cctype>
#include <charconv>
#include <set>

namespace edge {

using namespace ast;

namespace {

enum class Tok {
    Ident,
    Int,
    Float,
    Label,  // .N
    LBrack,
    RBrack,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    DColon,
    Assign,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Arrow,
    Shl,
    Plus,
    Minus,
    Star,
    Question,
    AndAnd,
    Bar,
    End,
};

std::string tok_name(Tok t)
{
    switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Int: return "integer";
    case Tok::Float: return "number";
    case Tok::Label: return "operation label";
    case Tok::LBrack: return "'['";
    case Tok::RBrack: return "']'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::Comma: return "','";
    case Tok::Semi: return "';'";
    case Tok::Colon: return "':'";
    case Tok::DColon: return "'::'";
    case Tok::Assign: return "'='";
    case Tok::Eq: return "'=='";
    case Tok::Ne: return "'!='";
    case Tok::Lt: return "'<'";
    case Tok::Le: return "'<='";
    case Tok::Gt: return "'>'";
    case Tok::Ge: return "'>='";
    case Tok::Arrow: return "'=>'";
    case Tok::Shl: return "'<<'";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Question: return "'?'";
    case Tok::AndAnd: return "'&&'";
    case Tok::Bar: return "'|'";
    case Tok::End: return "end of input";
    }
    return "?";
}

struct Token {
    Tok kind = Tok::End;
    std::string text;
    int line = 1;
    int column = 1;
    int length = 0;
};

struct Failure {
    Diagnostic diag;
};

class Lexer {
public:
    Lexer(std::string_view src, const std::string& file, std::vector<Diagnostic>& diags)
        : src_(src), file_(file), diags_(diags)
    {
    }

    std::vector<Token> run()
    {
        std::vector<Token> out;
        while (true) {
            skip_space();
            Token t;
            t.line = line_;
            t.column = col_;
            if (pos_ >= src_.size()) {
                t.kind = Tok::End;
                out.push_back(t);
                return out;
            }
            size_t start = pos_;
            char c = src_[pos_];
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                while (pos_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                    advance();
                t.kind = Tok::Ident;
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                t.kind = number();
            } else if (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
                advance();
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
                t.kind = Tok::Label;
            } else if (!punct(t.kind)) {
                advance();
                diags_.push_back({{file_, t.line, t.column, 1},
                                  std::string("unexpected character '") +
                                      (static_cast<unsigned char>(c) < 0x80 ? std::string(1, c) : "\\x" + hex(c)) + "'",
                                  {}});
                continue;
            }
            t.text = std::string(src_.substr(start, pos_ - start));
            t.length = static_cast<int>(pos_ - start);
            out.push_back(t);
        }
    }

private:
    static std::string hex(char c)
    {
        const char* d = "0123456789abcdef";
        auto u = static_cast<unsigned char>(c);
        return {d[u >> 4], d[u & 15]};
    }

    void advance()
    {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_space()
    {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                advance();
            } else if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else {
                break;
            }
        }
    }

    Tok number()
    {
        bool is_float = false;
        auto digits = [&] {
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        };
        digits();
        if (pos_ + 1 < src_.size() && src_[pos_] == '.' && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
            is_float = true;
            advance();
            digits();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            size_t look = pos_ + 1;
            if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
            if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
                is_float = true;
                while (pos_ < look) advance();
                digits();
            }
        }
        return is_float ? Tok::Float : Tok::Int;
    }

    bool punct(Tok& kind)
    {
        auto two = [&](char a, char b) {
            return pos_ + 1 < src_.size() && src_[pos_] == a && src_[pos_ + 1] == b;
        };
        struct P2 {
            char a, b;
            Tok t;
        };
        static const P2 pairs[] = {{':', ':', Tok::DColon}, {'=', '=', Tok::Eq},    {'!', '=', Tok::Ne},
                                   {'<', '=', Tok::Le},     {'>', '=', Tok::Ge},    {'=', '>', Tok::Arrow},
                                   {'<', '<', Tok::Shl},    {'&', '&', Tok::AndAnd}};
        for (const auto& p : pairs)
            if (two(p.a, p.b)) {
                advance();
                advance();
                kind = p.t;
                return true;
            }
        switch (src_[pos_]) {
        case '[': kind = Tok::LBrack; break;
        case ']': kind = Tok::RBrack; break;
        case '(': kind = Tok::LParen; break;
        case ')': kind = Tok::RParen; break;
        case '{': kind = Tok::LBrace; break;
        case '}': kind = Tok::RBrace; break;
        case ',': kind = Tok::Comma; break;
        case ';': kind = Tok::Semi; break;
        case ':': kind = Tok::Colon; break;
        case '=': kind = Tok::Assign; break;
        case '<': kind = Tok::Lt; break;
        case '>': kind = Tok::Gt; break;
        case '+': kind = Tok::Plus; break;
        case '-': kind = Tok::Minus; break;
        case '*': kind = Tok::Star; break;
        case '?': kind = Tok::Question; break;
        case '|': kind = Tok::Bar; break;
        default: return false;
        }
        advance();
        return true;
    }

    std::string_view src_;
    const std::string& file_;
    std::vector<Diagnostic>& diags_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

const std::set<std::string> kReserved = {"min", "max", "case", "else", "cascade", "until", "nnz", "user",
                                         "inf", "true", "false", "in"};

class Parser {
public:
    Parser(std::vector<Token> toks, const std::string& file, std::vector<Diagnostic>& diags)
        : t_(std::move(toks)), file_(file), diags_(diags)
    {
    }

    Program program()
    {
        Program p;
        p.body.loc = loc();
        bool seen_tensors = false, seen_init = false, seen_einsum = false;
        while (!at(Tok::End)) {
            try {
                if (at_word("tensors") && !seen_tensors) {
                    seen_tensors = true;
                    next();
                    section([&] { p.decls.push_back(decl()); });
                } else if (at_word("init") && !seen_init) {
                    seen_init = true;
                    next();
                    section([&] { p.inits.push_back(init_item()); });
                } else if (at_word("einsum") && !seen_einsum) {
                    seen_einsum = true;
                    Loc l = loc();
                    next();
                    expect(Tok::LBrace);
                    p.body = cascade_body("i", l);
                    expect(Tok::RBrace);
                } else {
                    fail({"'tensors'", "'init'", "'einsum'"});
                }
            } catch (const Failure& f) {
                diags_.push_back(f.diag);
                return p;
            }
        }
        return p;
    }

private:
    // ---- token helpers ----
    const Token& peek(size_t k = 0) const { return t_[std::min(pos_ + k, t_.size() - 1)]; }
    bool at(Tok k, size_t ahead = 0) const { return peek(ahead).kind == k; }
    bool at_word(std::string_view w, size_t ahead = 0) const
    {
        return peek(ahead).kind == Tok::Ident && peek(ahead).text == w;
    }
    const Token& next()
    {
        const Token& t = t_[pos_];
        if (pos_ + 1 < t_.size()) ++pos_;
        return t;
    }
    Loc loc() const
    {
        const Token& t = peek();
        return Loc{{file_, t.line, t.column, t.length}};
    }

    [[noreturn]] void fail(std::vector<std::string> expected, std::string msg = {})
    {
        const Token& t = peek();
        if (msg.empty())
            msg = t.kind == Tok::End ? "unexpected end of input" : "unexpected token '" + t.text + "'";
        throw Failure{{{file_, t.line, t.column, t.length}, std::move(msg), std::move(expected)}};
    }

    const Token& expect(Tok k)
    {
        if (!at(k)) fail({tok_name(k)});
        return next();
    }

    void expect_word(std::string_view w)
    {
        if (!at_word(w)) fail({"'" + std::string(w) + "'"});
        next();
    }

    std::string ident()
    {
        if (!at(Tok::Ident)) fail({"identifier"});
        return next().text;
    }

    std::string name()
    {
        if (at(Tok::Ident) && kReserved.count(peek().text)) fail({"identifier"}, "'" + peek().text + "' is reserved");
        return ident();
    }

    int64_t integer()
    {
        const Token& t = expect(Tok::Int);
        int64_t v = 0;
        auto r = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (r.ec != std::errc())
            throw Failure{{{file_, t.line, t.column, t.length}, "integer literal out of range", {}}};
        return v;
    }

    int label_value(const Token& t)
    {
        int v = 0;
        auto r = std::from_chars(t.text.data() + 1, t.text.data() + t.text.size(), v);
        if (r.ec != std::errc() || v <= 0)
            throw Failure{{{file_, t.line, t.column, t.length}, "invalid operation label", {}}};
        return v;
    }

    // Skips to just past the next ';' at the current nesting level, or stops at a closing brace.
    void synchronize()
    {
        int depth = 0;
        while (!at(Tok::End)) {
            Tok k = peek().kind;
            if (k == Tok::LBrace) ++depth;
            if (k == Tok::RBrace) {
                if (depth == 0) return;
                --depth;
            }
            next();
            if (k == Tok::Semi && depth == 0) return;
        }
    }

    template <typename F>
    void section(F item)
    {
        expect(Tok::LBrace);
        while (!at(Tok::RBrace)) {
            if (at(Tok::End)) fail({"'}'"});
            size_t before = pos_;
            try {
                item();
            } catch (const Failure& f) {
                diags_.push_back(f.diag);
                if (pos_ == before) next();
                synchronize();
            }
        }
        next();
    }

    // ---- declarations ----
    TensorDeclAst decl()
    {
        TensorDeclAst d;
        d.loc = loc();
        d.name = name();
        expect(Tok::LBrack);
        if (!at(Tok::RBrack)) {
            do {
                RankDeclAst r;
                r.name = name();
                if (at(Tok::Assign)) {
                    next();
                    if (at(Tok::Bar)) {
                        next();
                        r.shape.kind = ShapeSpec::Kind::Param;
                        r.shape.param = name();
                        expect(Tok::Bar);
                    } else if (at(Tok::Int)) {
                        r.shape.kind = ShapeSpec::Kind::Literal;
                        r.shape.value = integer();
                    } else {
                        fail({"integer", "'|'"});
                    }
                } else {
                    r.shape.kind = ShapeSpec::Kind::Unbounded;
                }
                d.ranks.push_back(r);
            } while (at(Tok::Comma) && (next(), true));
        }
        expect(Tok::RBrack);
        expect(Tok::Colon);
        Token dt = peek();
        auto parsed = parse_dtype(ident());
        if (!parsed) throw Failure{{{file_, dt.line, dt.column, dt.length}, "unknown dtype '" + dt.text + "'",
                                    {"'int'", "'float'", "'bool'"}}};
        d.dtype = *parsed;
        expect(Tok::Comma);
        expect_word("empty");
        expect(Tok::Assign);
        Token et = peek();
        std::string text;
        if (at(Tok::Minus)) {
            next();
            text = "-";
        }
        if (at(Tok::Int) || at(Tok::Float) || at(Tok::Ident)) text += next().text;
        else fail({"literal"});
        auto v = Scalar::parse(text, d.dtype);
        if (!v)
            throw Failure{{{file_, et.line, et.column, static_cast<int>(text.size())},
                           "empty value '" + text + "' is not a valid " + std::string(dtype_name(d.dtype)), {}}};
        d.empty = *v;
        expect(Tok::Semi);
        return d;
    }

    InitItem init_item()
    {
        InitItem it;
        it.loc = loc();
        if (at(Tok::Ident) && at(Tok::Assign, 1) && at_word("user", 2)) {
            it.user = true;
            it.tensor = next().text;
            next();
            next();
            expect(Tok::Semi);
            return it;
        }
        it.stmt = statement();
        return it;
    }

    // ---- cascades ----
    Cascade cascade_body(const std::string& var, Loc l)
    {
        Cascade c;
        c.var = var;
        c.loc = l;
        while (!at(Tok::RBrace) && !at(Tok::End)) {
            size_t before = pos_;
            try {
                if (at_word("until")) {
                    c.stop = stop();
                    if (!at(Tok::RBrace)) fail({"'}'"}, "the stopping condition must end its cascade");
                    break;
                }
                if (at_word("cascade") && at(Tok::Ident, 1) && at(Tok::LBrace, 2)) {
                    Loc cl = loc();
                    next();
                    std::string v = name();
                    expect(Tok::LBrace);
                    CascadeItem item;
                    item.is_cascade = true;
                    item.nested.push_back(cascade_body(v, cl));
                    expect(Tok::RBrace);
                    c.items.push_back(std::move(item));
                    continue;
                }
                CascadeItem item;
                item.stmt = statement();
                c.items.push_back(std::move(item));
            } catch (const Failure& f) {
                diags_.push_back(f.diag);
                if (pos_ == before) next();
                synchronize();
            }
        }
        return c;
    }

    GenRef genref()
    {
        GenRef g;
        g.loc = loc();
        g.tensor = name();
        expect(Tok::LBrack);
        if (at(Tok::Int)) {
            g.offset = integer();
        } else {
            g.var = name();
            if (at(Tok::Plus)) {
                next();
                g.offset = integer();
            }
        }
        expect(Tok::RBrack);
        return g;
    }

    StopCond stop()
    {
        expect_word("until");
        StopCond s;
        if (at_word("nnz") && at(Tok::LParen, 1)) {
            next();
            next();
            s.kind = StopCond::Kind::OccupancyZero;
            s.a = genref();
            expect(Tok::RParen);
            expect(Tok::Eq);
            Token z = peek();
            if (integer() != 0) throw Failure{{{file_, z.line, z.column, z.length}, "nnz can only be compared with 0", {"0"}}};
        } else {
            s.kind = StopCond::Kind::TensorEqual;
            s.a = genref();
            expect(Tok::Eq);
            s.b = genref();
        }
        expect(Tok::Semi);
        return s;
    }

    // ---- statements ----
    Statement statement()
    {
        Statement s;
        s.loc = loc();
        s.out = access();
        if (at(Tok::Shl)) {
            next();
            s.kind = Statement::Kind::Update;
            s.rhs = operand();
            if (at(Tok::Label)) fail({"'::'", "';'"}, "the operand of '<<' must be parenthesized when it is a binary expression");
            if (at(Tok::DColon)) s.actions = actions();
            expect(Tok::Semi);
            return s;
        }
        if (!at(Tok::Assign)) fail({"'='", "'<<'"});
        next();
        if (at_word("case") && at(Tok::LBrace, 1)) {
            next();
            next();
            s.kind = Statement::Kind::Case;
            while (!at(Tok::RBrace)) {
                CaseArm arm;
                arm.loc = loc();
                if (at_word("else") && at(Tok::Arrow, 1)) {
                    next();
                } else {
                    arm.guard = cond();
                }
                expect(Tok::Arrow);
                arm.rhs = rhs();
                if (at(Tok::DColon)) arm.actions = actions();
                expect(Tok::Semi);
                s.arms.push_back(std::move(arm));
            }
            next();
            expect(Tok::Semi);
            return s;
        }
        s.kind = Statement::Kind::Assign;
        s.rhs = rhs();
        if (at(Tok::DColon)) s.actions = actions();
        expect(Tok::Semi);
        return s;
    }

    RhsExpr rhs()
    {
        RhsExpr left = operand();
        if (!at(Tok::Label)) return left;
        const Token& lt = next();
        int label = label_value(lt);
        RhsExpr right = operand();
        if (at(Tok::Label))
            fail({"'::'", "';'"}, "binary operations must be parenthesized; precedence is never inferred");
        RhsExpr b = RhsExpr::binary(label, std::move(left), std::move(right));
        return b;
    }

    RhsExpr operand()
    {
        Loc l = loc();
        if (at(Tok::LParen)) {
            next();
            RhsExpr e = rhs();
            expect(Tok::RParen);
            return e;
        }
        if (at(Tok::Minus) || at(Tok::Int) || at(Tok::Float) || at_word("inf") || at_word("true") || at_word("false")) {
            RhsExpr e;
            e.kind = RhsExpr::Kind::Literal;
            e.loc = l;
            e.literal = literal();
            return e;
        }
        if (!at(Tok::Ident)) fail({"'('", "tensor access", "rank variable", "literal"});
        if (at(Tok::LBrack, 1)) return RhsExpr::leaf(access());
        if (at(Tok::LParen, 1)) {
            std::string op = name();
            next();
            Access a = access();
            a.unary = op;
            a.loc = l;
            expect(Tok::RParen);
            return RhsExpr::leaf(std::move(a));
        }
        RhsExpr e;
        e.kind = RhsExpr::Kind::RankVar;
        e.loc = l;
        e.var = name();
        return e;
    }

    Scalar literal()
    {
        bool neg = false;
        if (at(Tok::Minus)) {
            next();
            neg = true;
        }
        const Token& t = peek();
        if (at_word("inf")) {
            next();
            return Scalar::infinity(neg ? -1 : 1);
        }
        if (!neg && (at_word("true") || at_word("false"))) return Scalar::boolean(next().text == "true");
        if (at(Tok::Int)) {
            auto v = Scalar::parse((neg ? "-" : "") + t.text, DType::Int);
            if (!v) throw Failure{{{file_, t.line, t.column, t.length}, "integer literal out of range", {}}};
            next();
            return *v;
        }
        if (at(Tok::Float)) {
            auto v = Scalar::parse((neg ? "-" : "") + t.text, DType::Real);
            if (!v) throw Failure{{{file_, t.line, t.column, t.length}, "invalid number", {}}};
            next();
            return *v;
        }
        fail({"literal"});
    }

    Access access()
    {
        Access a;
        a.loc = loc();
        a.tensor = name();
        expect(Tok::LBrack);
        if (!at(Tok::RBrack)) {
            do {
                a.subs.push_back(subscript());
            } while (at(Tok::Comma) && (next(), true));
        }
        expect(Tok::RBrack);
        return a;
    }

    Subscript subscript()
    {
        Subscript s;
        if (at(Tok::Ident) && at_word("in", 1)) {
            std::string v = name();
            next();
            s.expr = RankExpr::var(v);
            s.constraint = BoolCond::in_list(v, name());
            return s;
        }
        s.expr = rank_expr();
        if (at(Tok::Star)) {
            next();
            s.is_mutable = true;
        }
        if (at(Tok::Colon)) {
            next();
            s.constraint = cond();
        }
        return s;
    }

    RankExpr rank_expr()
    {
        if (at(Tok::Int)) return RankExpr::constant(integer());
        if (at(Tok::Minus) && at(Tok::Int, 1)) {
            next();
            return RankExpr::constant(-integer());
        }
        if (at(Tok::LParen)) {
            next();
            RankExpr e;
            e.kind = RankExpr::Kind::Ternary;
            e.cond.push_back(cond());
            expect(Tok::Question);
            e.arms.push_back(rank_expr());
            expect(Tok::Colon);
            e.arms.push_back(rank_expr());
            expect(Tok::RParen);
            return e;
        }
        if ((at_word("min") || at_word("max")) && at(Tok::LParen, 1)) {
            RankExpr e;
            e.kind = next().text == "min" ? RankExpr::Kind::MinOf : RankExpr::Kind::MaxOf;
            next();
            e.a = name();
            expect(Tok::Comma);
            e.b = name();
            expect(Tok::RParen);
            return e;
        }
        if (!at(Tok::Ident)) fail({"rank expression"});
        RankExpr e = RankExpr::var(name());
        if (at(Tok::Plus) && at(Tok::Ident, 1)) {
            next();
            e.kind = RankExpr::Kind::Sum;
            e.b = name();
        } else if ((at(Tok::Plus) || at(Tok::Minus)) && at(Tok::Int, 1)) {
            bool minus = next().kind == Tok::Minus;
            int64_t k = integer();
            e.kind = RankExpr::Kind::Offset;
            e.value = minus ? -k : k;
        }
        return e;
    }

    BoolCond cond_atom()
    {
        if (at(Tok::Ident) && at_word("in", 1)) {
            std::string v = name();
            next();
            return BoolCond::in_list(v, name());
        }
        RankExpr l = rank_expr();
        static const std::pair<Tok, const char*> ops[] = {{Tok::Lt, "<"},  {Tok::Le, "<="}, {Tok::Gt, ">"},
                                                          {Tok::Ge, ">="}, {Tok::Eq, "=="}, {Tok::Ne, "!="}};
        for (const auto& [k, s] : ops)
            if (at(k)) {
                next();
                return BoolCond::compare(std::move(l), s, rank_expr());
            }
        fail({"'<'", "'<='", "'>'", "'>='", "'=='", "'!='"});
    }

    BoolCond cond()
    {
        BoolCond first = cond_atom();
        if (!at(Tok::AndAnd)) return first;
        BoolCond c;
        c.kind = BoolCond::Kind::And;
        c.parts.push_back(std::move(first));
        while (at(Tok::AndAnd)) {
            next();
            c.parts.push_back(cond_atom());
        }
        return c;
    }

    // ---- actions ----
    std::vector<std::string> rank_list(bool starred)
    {
        std::vector<std::string> out;
        if (!starred && at(Tok::Semi)) return out;
        do {
            out.push_back(name());
            if (starred) expect(Tok::Star);
        } while (at(Tok::Comma) && (next(), true));
        return out;
    }

    std::vector<Action> actions()
    {
        expect(Tok::DColon);
        std::vector<Action> out;
        do {
            Action a;
            a.loc = loc();
            if (at_word("map")) {
                next();
                a.kind = Action::Kind::Map;
                a.label = label_value(expect(Tok::Label));
            } else if (at_word("reduce")) {
                next();
                a.kind = Action::Kind::Reduce;
                if (at(Tok::Label)) a.label = label_value(next());
            } else if (at_word("populate")) {
                next();
                a.kind = Action::Kind::Populate;
                a.compute = "pass";
            } else {
                fail({"'map'", "'reduce'", "'populate'"});
            }
            expect(Tok::LParen);
            if (a.kind == Action::Kind::Populate) {
                a.ranks = rank_list(true);
                if (at(Tok::Semi)) {
                    next();
                    a.compute = ident();
                    if (at(Tok::Semi)) {
                        next();
                        a.coord = ident();
                        if (at(Tok::LParen)) {
                            next();
                            a.coord_arg = integer();
                            expect(Tok::RParen);
                        }
                    }
                }
            } else {
                a.ranks = rank_list(false);
                expect(Tok::Semi);
                a.compute = ident();
                if (at(Tok::Semi)) {
                    next();
                    a.merge = ident();
                }
            }
            expect(Tok::RParen);
            out.push_back(std::move(a));
        } while (at_word("map") || at_word("reduce") || at_word("populate"));
        return out;
    }

    std::vector<Token> t_;
    size_t pos_ = 0;
    const std::string& file_;
    std::vector<Diagnostic>& diags_;
};

// ---- printing ----

std::string join(const std::vector<std::string>& v, const char* sep)
{
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
    return s;
}

std::string print_shape(const ShapeSpec& s)
{
    switch (s.kind) {
    case ShapeSpec::Kind::Unbounded: return "";
    case ShapeSpec::Kind::Literal: return "=" + std::to_string(s.value);
    case ShapeSpec::Kind::Param: return "=|" + s.param + "|";
    }
    return "";
}

std::string print_actions(const std::vector<Action>& acts)
{
    if (acts.empty()) return "";
    std::vector<std::string> parts;
    for (const auto& a : acts) {
        switch (a.kind) {
        case Action::Kind::Map:
            parts.push_back("map." + std::to_string(a.label) + "(" + join(a.ranks, ", ") + "; " + a.compute + "; " +
                            a.merge + ")");
            break;
        case Action::Kind::Reduce:
            parts.push_back("reduce" + (a.label ? "." + std::to_string(a.label) : std::string()) + "(" +
                            join(a.ranks, ", ") + "; " + a.compute + "; " + a.merge + ")");
            break;
        case Action::Kind::Populate: {
            std::vector<std::string> rs;
            for (const auto& r : a.ranks) rs.push_back(r + "*");
            std::string coord = a.coord + (a.coord_arg ? "(" + std::to_string(*a.coord_arg) + ")" : "");
            parts.push_back("populate(" + join(rs, ", ") + "; " + a.compute + "; " + coord + ")");
            break;
        }
        }
    }
    return " :: " + join(parts, " ");
}

std::string print_genref(const GenRef& g)
{
    std::string s = g.tensor + "[";
    if (g.var.empty()) s += std::to_string(g.offset);
    else s += g.var + (g.offset ? "+" + std::to_string(g.offset) : "");
    return s + "]";
}

void print_cascade(const Cascade& c, int indent, std::string& out)
{
    std::string pad(static_cast<size_t>(indent) * 2, ' ');
    for (const auto& item : c.items) {
        if (item.is_cascade) {
            for (const auto& n : item.nested) {
                out += pad + "cascade " + n.var + " {\n";
                print_cascade(n, indent + 1, out);
                out += pad + "}\n";
            }
        } else {
            out += pad + print_statement(item.stmt) + "\n";
        }
    }
    if (c.stop) {
        if (c.stop->kind == StopCond::Kind::OccupancyZero)
            out += pad + "until nnz(" + print_genref(c.stop->a) + ") == 0;\n";
        else
            out += pad + "until " + print_genref(c.stop->a) + " == " + print_genref(c.stop->b) + ";\n";
    }
}

}  // namespace

ParseResult parse(std::string_view text, const std::string& file)
{
    ParseResult res;
    Lexer lx(text, file, res.diagnostics);
    std::vector<Token> toks = lx.run();
    Parser ps(std::move(toks), file, res.diagnostics);
    Program p = ps.program();
    if (res.diagnostics.empty()) res.program = std::move(p);
    return res;
}

std::string print_literal(const Scalar& v)
{
    std::string s = v.to_string();
    if (v.type() == DType::Real && s.find_first_of(".ein") == std::string::npos) s += ".0";
    return s;
}

std::string print_rank_expr(const RankExpr& e)
{
    switch (e.kind) {
    case RankExpr::Kind::Var: return e.a;
    case RankExpr::Kind::Const: return std::to_string(e.value);
    case RankExpr::Kind::Offset:
        return e.a + (e.value < 0 ? "-" + std::to_string(-e.value) : "+" + std::to_string(e.value));
    case RankExpr::Kind::Sum: return e.a + "+" + e.b;
    case RankExpr::Kind::MinOf: return "min(" + e.a + ", " + e.b + ")";
    case RankExpr::Kind::MaxOf: return "max(" + e.a + ", " + e.b + ")";
    case RankExpr::Kind::Ternary:
        return "(" + print_cond(e.cond.at(0)) + " ? " + print_rank_expr(e.arms.at(0)) + " : " +
               print_rank_expr(e.arms.at(1)) + ")";
    }
    return "";
}

std::string print_cond(const BoolCond& c)
{
    switch (c.kind) {
    case BoolCond::Kind::Compare:
        return print_rank_expr(c.sides.at(0)) + " " + c.op + " " + print_rank_expr(c.sides.at(1));
    case BoolCond::Kind::InList: return c.var + " in " + c.list;
    case BoolCond::Kind::And: {
        std::vector<std::string> ps;
        for (const auto& p : c.parts) ps.push_back(print_cond(p));
        return join(ps, " && ");
    }
    }
    return "";
}

std::string print_access(const Access& a)
{
    std::vector<std::string> subs;
    for (const auto& s : a.subs) {
        if (s.constraint && !s.is_mutable && s.expr.kind == RankExpr::Kind::Var &&
            s.constraint->kind == BoolCond::Kind::InList && s.constraint->var == s.expr.a) {
            subs.push_back(print_cond(*s.constraint));
            continue;
        }
        std::string t = print_rank_expr(s.expr);
        if (s.is_mutable) t += "*";
        if (s.constraint) t += ": " + print_cond(*s.constraint);
        subs.push_back(t);
    }
    std::string body = a.tensor + "[" + join(subs, ", ") + "]";
    return a.unary.empty() ? body : a.unary + "(" + body + ")";
}

std::string print_rhs(const RhsExpr& e, bool top)
{
    switch (e.kind) {
    case RhsExpr::Kind::Leaf: return print_access(e.access);
    case RhsExpr::Kind::RankVar: return e.var;
    case RhsExpr::Kind::Literal: return print_literal(e.literal);
    case RhsExpr::Kind::Binary: {
        std::string s = print_rhs(e.kids.at(0), false) + " ." + std::to_string(e.label) + " " +
                        print_rhs(e.kids.at(1), false);
        return top ? s : "(" + s + ")";
    }
    }
    return "";
}

std::string print_statement(const Statement& s)
{
    std::string out = print_access(s.out);
    switch (s.kind) {
    case Statement::Kind::Assign: return out + " = " + print_rhs(s.rhs) + print_actions(s.actions) + ";";
    case Statement::Kind::Update: return out + " << " + print_rhs(s.rhs, false) + print_actions(s.actions) + ";";
    case Statement::Kind::Case: {
        out += " = case {";
        for (const auto& arm : s.arms) {
            out += " " + (arm.guard ? print_cond(*arm.guard) : std::string("else")) + " => " + print_rhs(arm.rhs) +
                   print_actions(arm.actions) + ";";
        }
        return out + " };";
    }
    }
    return out;
}

std::string pretty_print(const Program& p)
{
    std::string out = "tensors {\n";
    for (const auto& d : p.decls) {
        std::vector<std::string> rs;
        for (const auto& r : d.ranks) rs.push_back(r.name + print_shape(r.shape));
        out += "  " + d.name + "[" + join(rs, ", ") + "]: " + std::string(dtype_name(d.dtype)) +
               ", empty=" + d.empty.to_string() + ";\n";
    }
    out += "}\ninit {\n";
    for (const auto& it : p.inits) {
        if (it.user) out += "  " + it.tensor + " = user;\n";
        else out += "  " + print_statement(it.stmt) + "\n";
    }
    out += "}\neinsum {\n";
    print_cascade(p.body, 1, out);
    out += "}\n";
    return out;
}

}  // namespace edge
