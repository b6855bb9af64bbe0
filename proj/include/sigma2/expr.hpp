// expr.hpp - arithmetic expressions for manifest-defined fields. Recursive
// descent over + - * / ^, unary minus, a fixed function table and the chart
// coordinates (x, y, z on the torus; r, theta, phi on the band).
#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sigma2/grid.hpp"

namespace sigma2 {

struct ParseError : std::runtime_error {
    size_t offset;
    ParseError(const std::string& msg, size_t off)
        : std::runtime_error(msg + " at offset " + std::to_string(off)), offset(off) {}
};

struct EvalError : std::runtime_error {
    long node;
    EvalError(const std::string& msg, long n)
        : std::runtime_error(msg + " at node " + std::to_string(n)), node(n) {}
};

namespace expr_detail {

enum class NodeKind { Number, Variable, Unary, Binary, Call };

// variable ids: 0,1,2 are coordinate axes of the chart
inline int variable_id(const std::string& name) {
    if (name == "x" || name == "r") return 0;
    if (name == "y" || name == "theta") return 1;
    if (name == "z" || name == "phi") return 2;
    return -1;
}

inline int function_id(const std::string& name) {
    static const char* names[] = {"sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "cosh", "sinh"};
    for (int i = 0; i < 9; ++i)
        if (name == names[i]) return i;
    return -1;
}

inline const char* function_name(int id) {
    static const char* names[] = {"sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "cosh", "sinh"};
    return names[id];
}

}  // namespace expr_detail

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    expr_detail::NodeKind kind;
    double number = 0.0;     // Number
    int id = 0;              // Variable axis / Call function id
    char op = 0;             // Binary: + - * / ^ ; Unary: -
    ExprPtr lhs, rhs;        // Binary children; Unary/Call use lhs
    std::string var_name;    // original spelling, for printing and validation
};

class ExprAst {
  public:
    ExprAst() = default;
    explicit ExprAst(ExprPtr root, std::string src) : root_(std::move(root)), src_(std::move(src)) {}

    const ExprPtr& root() const { return root_; }
    const std::string& source() const { return src_; }
    bool empty() const { return !root_; }

    /// Canonical fully parenthesized form; parse(print(ast)) reproduces the tree.
    std::string print() const { return print_node(root_); }

    /// Names of the variables the expression references.
    std::vector<std::string> variables() const {
        std::vector<std::string> out;
        collect_vars(root_, out);
        return out;
    }

  private:
    static std::string print_node(const ExprPtr& n) {
        using expr_detail::NodeKind;
        if (!n) return "0";
        switch (n->kind) {
            case NodeKind::Number: {
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.17g", n->number);
                return buf;
            }
            case NodeKind::Variable:
                return n->var_name;
            case NodeKind::Unary:
                return "(-" + print_node(n->lhs) + ")";
            case NodeKind::Call:
                return std::string(expr_detail::function_name(n->id)) + "(" + print_node(n->lhs) + ")";
            case NodeKind::Binary:
                return "(" + print_node(n->lhs) + std::string(1, n->op) + print_node(n->rhs) + ")";
        }
        return "0";
    }

    static void collect_vars(const ExprPtr& n, std::vector<std::string>& out) {
        if (!n) return;
        if (n->kind == expr_detail::NodeKind::Variable) {
            for (const auto& s : out)
                if (s == n->var_name) return;
            out.push_back(n->var_name);
            return;
        }
        collect_vars(n->lhs, out);
        collect_vars(n->rhs, out);
    }

    ExprPtr root_;
    std::string src_;
};

namespace expr_detail {

class Parser {
  public:
    explicit Parser(const std::string& src) : s_(src) {}

    ExprPtr parse() {
        ExprPtr e = parse_sum();
        skip_ws();
        if (pos_ != s_.size()) throw ParseError("unexpected trailing input", pos_);
        return e;
    }

  private:
    ExprPtr parse_sum() {
        ExprPtr e = parse_term();
        for (;;) {
            skip_ws();
            if (peek() == '+' || peek() == '-') {
                const char op = take();
                e = binary(op, e, parse_term());
            } else {
                return e;
            }
        }
    }

    ExprPtr parse_term() {
        ExprPtr e = parse_unary();
        for (;;) {
            skip_ws();
            if (peek() == '*' || peek() == '/') {
                const char op = take();
                e = binary(op, e, parse_unary());
            } else {
                return e;
            }
        }
    }

    ExprPtr parse_unary() {
        skip_ws();
        if (peek() == '-') {
            take();
            auto n = std::make_shared<ExprNode>();
            n->kind = NodeKind::Unary;
            n->op = '-';
            n->lhs = parse_unary();
            return n;
        }
        return parse_power();
    }

    ExprPtr parse_power() {
        ExprPtr base = parse_primary();
        skip_ws();
        if (peek() == '^') {
            take();
            return binary('^', base, parse_unary());  // right associative, exponent may be signed
        }
        return base;
    }

    ExprPtr parse_primary() {
        skip_ws();
        const char c = peek();
        if (c == '(') {
            const size_t open = pos_;
            take();
            ExprPtr e = parse_sum();
            skip_ws();
            if (peek() != ')') throw ParseError("missing ')' for '(' ", open);
            take();
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
        throw ParseError(pos_ >= s_.size() ? "unexpected end of input" : "unexpected character", pos_);
    }

    ExprPtr parse_number() {
        const char* start = s_.c_str() + pos_;
        char* end = nullptr;
        const double val = std::strtod(start, &end);
        if (end == start) throw ParseError("malformed number", pos_);
        pos_ += static_cast<size_t>(end - start);
        auto n = std::make_shared<ExprNode>();
        n->kind = NodeKind::Number;
        n->number = val;
        return n;
    }

    ExprPtr parse_ident() {
        const size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        const std::string name = s_.substr(start, pos_ - start);
        if (name == "pi" || name == "e") {
            auto n = std::make_shared<ExprNode>();
            n->kind = NodeKind::Number;
            n->number = (name == "pi") ? kPi : std::exp(1.0);
            n->var_name = name;
            return n;
        }
        const int fid = function_id(name);
        if (fid >= 0) {
            skip_ws();
            if (peek() != '(') throw ParseError("function '" + name + "' needs '('", pos_);
            take();
            ExprPtr arg = parse_sum();
            skip_ws();
            if (peek() != ')') throw ParseError("missing ')' in call of '" + name + "'", pos_);
            take();
            auto n = std::make_shared<ExprNode>();
            n->kind = NodeKind::Call;
            n->id = fid;
            n->lhs = arg;
            return n;
        }
        if (variable_id(name) >= 0) {
            auto n = std::make_shared<ExprNode>();
            n->kind = NodeKind::Variable;
            n->id = variable_id(name);
            n->var_name = name;
            return n;
        }
        throw ParseError("unknown identifier '" + name + "'", start);
    }

    static ExprPtr binary(char op, ExprPtr l, ExprPtr r) {
        auto n = std::make_shared<ExprNode>();
        n->kind = NodeKind::Binary;
        n->op = op;
        n->lhs = std::move(l);
        n->rhs = std::move(r);
        return n;
    }

    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    char take() { return s_[pos_++]; }
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    const std::string& s_;
    size_t pos_ = 0;
};

inline double eval_node(const ExprNode& n, const Vec3& xyz, long node) {
    switch (n.kind) {
        case NodeKind::Number:
            return n.number;
        case NodeKind::Variable:
            return xyz[n.id];
        case NodeKind::Unary:
            return -eval_node(*n.lhs, xyz, node);
        case NodeKind::Binary: {
            const double a = eval_node(*n.lhs, xyz, node);
            const double b = eval_node(*n.rhs, xyz, node);
            switch (n.op) {
                case '+': return a + b;
                case '-': return a - b;
                case '*': return a * b;
                case '/':
                    if (b == 0.0) throw EvalError("division by zero", node);
                    return a / b;
                default: {
                    const double p = std::pow(a, b);
                    if (!std::isfinite(p)) throw EvalError("non-finite power", node);
                    return p;
                }
            }
        }
        case NodeKind::Call: {
            const double a = eval_node(*n.lhs, xyz, node);
            switch (n.id) {
                case 0: return std::sin(a);
                case 1: return std::cos(a);
                case 2: return std::tan(a);
                case 3: return std::exp(a);
                case 4:
                    if (a <= 0.0) throw EvalError("log of non-positive value", node);
                    return std::log(a);
                case 5:
                    if (a < 0.0) throw EvalError("sqrt of negative value", node);
                    return std::sqrt(a);
                case 6: return std::tanh(a);
                case 7: return std::cosh(a);
                default: return std::sinh(a);
            }
        }
    }
    return 0.0;
}

}  // namespace expr_detail

/// Parse an expression string. Throws ParseError with the byte offset on
/// malformed input or unknown identifiers.
inline ExprAst parse(const std::string& src) {
    expr_detail::Parser p(src);
    return ExprAst(p.parse(), src);
}

/// Check that the AST only references coordinates present on the chart
/// (x,y,z for Torus3; r,theta,phi for S3Band).
inline void validate_variables(const ExprAst& ast, const ChartGrid& grid) {
    for (const auto& name : ast.variables()) {
        const bool torus_name = (name == "x" || name == "y" || name == "z");
        if (grid.kind == ChartKind::Torus3 && !torus_name)
            throw ValidationError("expression variable '" + name + "' is not a Torus3 coordinate");
        if (grid.kind == ChartKind::S3Band && torus_name)
            throw ValidationError("expression variable '" + name + "' is not an S3Band coordinate");
    }
}

/// Pointwise evaluation at the node coordinates of the chart.
inline ScalarField evaluate(const ExprAst& ast, const GridPtr& grid) {
    if (ast.empty()) throw std::invalid_argument("evaluate: empty expression");
    validate_variables(ast, *grid);
    ScalarField out(grid);
    for (long i = 0; i < grid->total; ++i)
        out[i] = expr_detail::eval_node(*ast.root(), grid->node_coords(i), i);
    out.check_finite("evaluate");
    return out;
}

/// Evaluate a scalar expression at a point (used for parameter validation).
inline double evaluate_at(const ExprAst& ast, const Vec3& xyz) {
    return expr_detail::eval_node(*ast.root(), xyz, -1);
}

}  // namespace sigma2
