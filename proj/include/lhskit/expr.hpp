#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "lhskit/chart.hpp"
#include "lhskit/errors.hpp"

namespace lhskit {

// ---------------------------------------------------------------------------
// Expression trees
//
// Closed-form coefficient functions of chart coordinates. Trees are immutable
// after construction and shared by reference count, so evaluation is pure and
// safe from any number of threads.
// ---------------------------------------------------------------------------

enum class Op {
    Constant, Var,
    Neg, Sin, Cos, Exp, Log, Sqrt, Abs,
    Add, Sub, Mul, Div, Pow,
};

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    Op op;
    double value = 0.0;  // Constant
    int var = -1;        // Var
    ExprPtr a, b;
};

namespace detail {
inline ExprPtr make_node(Op op, double value, int var, ExprPtr a, ExprPtr b) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->value = value;
    n->var = var;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}
}  // namespace detail

// First-order jet: value plus one partial per chart coordinate.
struct Jet1 {
    double value = 0.0;
    std::vector<double> partials;
};

class ExpressionTree {
public:
    ExpressionTree() = default;
    ExpressionTree(ExprPtr root, int arity) : root_(std::move(root)), arity_(arity) {}

    static ExpressionTree constant(double c, int arity) {
        return {detail::make_node(Op::Constant, c, -1, nullptr, nullptr), arity};
    }
    static ExpressionTree variable(int index, int arity) {
        if (index < 0 || index >= arity) throw Error("expression variable index out of range");
        return {detail::make_node(Op::Var, 0.0, index, nullptr, nullptr), arity};
    }

    bool empty() const { return root_ == nullptr; }
    int arity() const { return arity_; }
    const ExprPtr& root() const { return root_; }

    bool is_constant(double* out = nullptr) const {
        if (root_ && root_->op == Op::Constant) {
            if (out) *out = root_->value;
            return true;
        }
        return false;
    }

    // Reinterpret over a larger chart (variable indices unchanged). Used when
    // forms on M are pulled back to the suspension M x [-eps, eps].
    ExpressionTree lifted(int new_arity) const {
        if (new_arity < arity_) throw Error("cannot lift expression to a smaller chart");
        return {root_, new_arity};
    }

    double eval(const Point& x) const;
    Jet1 eval_jet(const Point& x) const;
    ExpressionTree derivative(int coord) const;
    std::string to_string(const std::vector<std::string>& names) const;

private:
    ExprPtr root_;
    int arity_ = 0;
};

// --- construction helpers (light identity folding only; keeps derivative
// --- trees from ballooning, no general simplification) ----------------------

namespace detail {
inline bool is_const(const ExprPtr& p, double v) {
    return p && p->op == Op::Constant && p->value == v;
}
inline bool is_const(const ExprPtr& p) { return p && p->op == Op::Constant; }
}  // namespace detail

inline ExpressionTree operator+(const ExpressionTree& x, const ExpressionTree& y) {
    int ar = std::max(x.arity(), y.arity());
    if (detail::is_const(x.root(), 0.0)) return y.lifted(ar);
    if (detail::is_const(y.root(), 0.0)) return x.lifted(ar);
    if (detail::is_const(x.root()) && detail::is_const(y.root()))
        return ExpressionTree::constant(x.root()->value + y.root()->value, ar);
    return {detail::make_node(Op::Add, 0, -1, x.root(), y.root()), ar};
}

inline ExpressionTree operator-(const ExpressionTree& x) {
    if (detail::is_const(x.root()))
        return ExpressionTree::constant(-x.root()->value, x.arity());
    return {detail::make_node(Op::Neg, 0, -1, x.root(), nullptr), x.arity()};
}

inline ExpressionTree operator-(const ExpressionTree& x, const ExpressionTree& y) {
    int ar = std::max(x.arity(), y.arity());
    if (detail::is_const(y.root(), 0.0)) return x.lifted(ar);
    if (detail::is_const(x.root(), 0.0)) return (-y).lifted(ar);
    if (detail::is_const(x.root()) && detail::is_const(y.root()))
        return ExpressionTree::constant(x.root()->value - y.root()->value, ar);
    return {detail::make_node(Op::Sub, 0, -1, x.root(), y.root()), ar};
}

inline ExpressionTree operator*(const ExpressionTree& x, const ExpressionTree& y) {
    int ar = std::max(x.arity(), y.arity());
    if (detail::is_const(x.root(), 0.0) || detail::is_const(y.root(), 0.0))
        return ExpressionTree::constant(0.0, ar);
    if (detail::is_const(x.root(), 1.0)) return y.lifted(ar);
    if (detail::is_const(y.root(), 1.0)) return x.lifted(ar);
    if (detail::is_const(x.root()) && detail::is_const(y.root()))
        return ExpressionTree::constant(x.root()->value * y.root()->value, ar);
    return {detail::make_node(Op::Mul, 0, -1, x.root(), y.root()), ar};
}

inline ExpressionTree operator/(const ExpressionTree& x, const ExpressionTree& y) {
    int ar = std::max(x.arity(), y.arity());
    if (detail::is_const(x.root(), 0.0) && !detail::is_const(y.root(), 0.0))
        return ExpressionTree::constant(0.0, ar);
    if (detail::is_const(y.root(), 1.0)) return x.lifted(ar);
    return {detail::make_node(Op::Div, 0, -1, x.root(), y.root()), ar};
}

inline ExpressionTree apply_unary(Op op, const ExpressionTree& x) {
    return {detail::make_node(op, 0, -1, x.root(), nullptr), x.arity()};
}
inline ExpressionTree sin(const ExpressionTree& x) { return apply_unary(Op::Sin, x); }
inline ExpressionTree cos(const ExpressionTree& x) { return apply_unary(Op::Cos, x); }
inline ExpressionTree exp(const ExpressionTree& x) { return apply_unary(Op::Exp, x); }
inline ExpressionTree log(const ExpressionTree& x) { return apply_unary(Op::Log, x); }
inline ExpressionTree sqrt(const ExpressionTree& x) { return apply_unary(Op::Sqrt, x); }
inline ExpressionTree abs(const ExpressionTree& x) { return apply_unary(Op::Abs, x); }
inline ExpressionTree pow(const ExpressionTree& x, const ExpressionTree& y) {
    return {detail::make_node(Op::Pow, 0, -1, x.root(), y.root()),
            std::max(x.arity(), y.arity())};
}

// scalar conveniences
inline ExpressionTree operator*(double c, const ExpressionTree& x) {
    return ExpressionTree::constant(c, x.arity()) * x;
}
inline ExpressionTree operator*(const ExpressionTree& x, double c) { return c * x; }
inline ExpressionTree operator+(double c, const ExpressionTree& x) {
    return ExpressionTree::constant(c, x.arity()) + x;
}
inline ExpressionTree operator-(double c, const ExpressionTree& x) {
    return ExpressionTree::constant(c, x.arity()) - x;
}
inline ExpressionTree operator/(const ExpressionTree& x, double c) {
    return x / ExpressionTree::constant(c, x.arity());
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace detail {

constexpr double kDivFloor = 1e-300;

inline double eval_node(const ExprNode* n, const Point& x) {
    switch (n->op) {
        case Op::Constant: return n->value;
        case Op::Var: return x[static_cast<std::size_t>(n->var)];
        case Op::Neg: return -eval_node(n->a.get(), x);
        case Op::Sin: return std::sin(eval_node(n->a.get(), x));
        case Op::Cos: return std::cos(eval_node(n->a.get(), x));
        case Op::Exp: return std::exp(eval_node(n->a.get(), x));
        case Op::Log: {
            double u = eval_node(n->a.get(), x);
            if (!(u > 0.0)) throw DomainError("log of non-positive value");
            return std::log(u);
        }
        case Op::Sqrt: {
            double u = eval_node(n->a.get(), x);
            if (u < 0.0) throw DomainError("sqrt of negative value");
            return std::sqrt(u);
        }
        case Op::Abs: return std::abs(eval_node(n->a.get(), x));
        case Op::Add: return eval_node(n->a.get(), x) + eval_node(n->b.get(), x);
        case Op::Sub: return eval_node(n->a.get(), x) - eval_node(n->b.get(), x);
        case Op::Mul: return eval_node(n->a.get(), x) * eval_node(n->b.get(), x);
        case Op::Div: {
            double den = eval_node(n->b.get(), x);
            if (std::abs(den) < kDivFloor) throw DomainError("division by zero");
            return eval_node(n->a.get(), x) / den;
        }
        case Op::Pow: {
            double u = eval_node(n->a.get(), x);
            if (n->b->op == Op::Constant) {
                double c = n->b->value;
                if (c == std::floor(c) && std::abs(c) <= 64.0) {
                    // integer exponent: valid for any base
                    double r = 1.0, base = u;
                    long k = static_cast<long>(c);
                    bool invert = k < 0;
                    if (invert) k = -k;
                    while (k) {
                        if (k & 1) r *= base;
                        base *= base;
                        k >>= 1;
                    }
                    if (invert) {
                        if (std::abs(r) < kDivFloor) throw DomainError("0 raised to negative power");
                        r = 1.0 / r;
                    }
                    return r;
                }
                if (u < 0.0) throw DomainError("negative base with non-integer exponent");
                return std::pow(u, c);
            }
            double v = eval_node(n->b.get(), x);
            if (u < 0.0) throw DomainError("negative base with non-constant exponent");
            return std::pow(u, v);
        }
    }
    throw Error("corrupt expression node");
}

struct JetVal {
    double v;
    std::vector<double> d;
};

inline JetVal jet_node(const ExprNode* n, const Point& x, int arity) {
    auto zero = [&] { return std::vector<double>(static_cast<std::size_t>(arity), 0.0); };
    switch (n->op) {
        case Op::Constant: return {n->value, zero()};
        case Op::Var: {
            auto d = zero();
            d[static_cast<std::size_t>(n->var)] = 1.0;
            return {x[static_cast<std::size_t>(n->var)], std::move(d)};
        }
        default: break;
    }
    JetVal a = jet_node(n->a.get(), x, arity);
    switch (n->op) {
        case Op::Neg: {
            for (auto& g : a.d) g = -g;
            return {-a.v, std::move(a.d)};
        }
        case Op::Sin: {
            double c = std::cos(a.v);
            for (auto& g : a.d) g *= c;
            return {std::sin(a.v), std::move(a.d)};
        }
        case Op::Cos: {
            double s = -std::sin(a.v);
            for (auto& g : a.d) g *= s;
            return {std::cos(a.v), std::move(a.d)};
        }
        case Op::Exp: {
            double e = std::exp(a.v);
            for (auto& g : a.d) g *= e;
            return {e, std::move(a.d)};
        }
        case Op::Log: {
            if (!(a.v > 0.0)) throw DomainError("log of non-positive value");
            for (auto& g : a.d) g /= a.v;
            return {std::log(a.v), std::move(a.d)};
        }
        case Op::Sqrt: {
            if (a.v < 0.0) throw DomainError("sqrt of negative value");
            double r = std::sqrt(a.v);
            if (r < kDivFloor) throw DomainError("sqrt derivative at zero");
            for (auto& g : a.d) g /= 2.0 * r;
            return {r, std::move(a.d)};
        }
        case Op::Abs: {
            double s = a.v >= 0.0 ? 1.0 : -1.0;
            for (auto& g : a.d) g *= s;
            return {std::abs(a.v), std::move(a.d)};
        }
        default: break;
    }
    JetVal b = jet_node(n->b.get(), x, arity);
    switch (n->op) {
        case Op::Add: {
            for (std::size_t i = 0; i < a.d.size(); ++i) a.d[i] += b.d[i];
            return {a.v + b.v, std::move(a.d)};
        }
        case Op::Sub: {
            for (std::size_t i = 0; i < a.d.size(); ++i) a.d[i] -= b.d[i];
            return {a.v - b.v, std::move(a.d)};
        }
        case Op::Mul: {
            for (std::size_t i = 0; i < a.d.size(); ++i)
                a.d[i] = a.d[i] * b.v + a.v * b.d[i];
            return {a.v * b.v, std::move(a.d)};
        }
        case Op::Div: {
            if (std::abs(b.v) < kDivFloor) throw DomainError("division by zero");
            for (std::size_t i = 0; i < a.d.size(); ++i)
                a.d[i] = (a.d[i] * b.v - a.v * b.d[i]) / (b.v * b.v);
            return {a.v / b.v, std::move(a.d)};
        }
        case Op::Pow: {
            double v = eval_node(n, x);
            if (n->b->op == Op::Constant) {
                // d(u^c) = c u^(c-1) u'
                double c = n->b->value;
                double u = a.v;
                double factor = 0.0;
                if (c != 0.0) {
                    bool integral = c == std::floor(c) && std::abs(c) <= 64.0;
                    if (std::abs(u) < kDivFloor) {
                        if (integral && c >= 1.0)
                            factor = (c == 1.0) ? 1.0 : 0.0;
                        else
                            throw DomainError("pow derivative at zero base");
                    } else {
                        factor = c * v / u;
                    }
                }
                for (auto& g : a.d) g *= factor;
                return {v, std::move(a.d)};
            }
            if (a.v <= 0.0) throw DomainError("negative base with non-constant exponent");
            double lu = std::log(a.v);
            for (std::size_t i = 0; i < a.d.size(); ++i)
                a.d[i] = v * (b.d[i] * lu + b.v * a.d[i] / a.v);
            return {v, std::move(a.d)};
        }
        default: break;
    }
    throw Error("corrupt expression node");
}

inline ExprPtr diff_node(const ExprPtr& n, int coord, int arity);

inline ExpressionTree wrap(const ExprPtr& p, int arity) { return {p, arity}; }

inline ExprPtr diff_node(const ExprPtr& n, int coord, int arity) {
    auto T = [&](const ExprPtr& p) { return wrap(p, arity); };
    auto D = [&](const ExprPtr& p) { return wrap(diff_node(p, coord, arity), arity); };
    auto C = [&](double c) { return ExpressionTree::constant(c, arity); };
    switch (n->op) {
        case Op::Constant: return C(0.0).root();
        case Op::Var: return C(n->var == coord ? 1.0 : 0.0).root();
        case Op::Neg: return (-D(n->a)).root();
        case Op::Sin: return (cos(T(n->a)) * D(n->a)).root();
        case Op::Cos: return (-(sin(T(n->a)) * D(n->a))).root();
        case Op::Exp: return (exp(T(n->a)) * D(n->a)).root();
        case Op::Log: return (D(n->a) / T(n->a)).root();
        case Op::Sqrt: return (D(n->a) / (C(2.0) * sqrt(T(n->a)))).root();
        case Op::Abs: return (T(n->a) / abs(T(n->a)) * D(n->a)).root();
        case Op::Add: return (D(n->a) + D(n->b)).root();
        case Op::Sub: return (D(n->a) - D(n->b)).root();
        case Op::Mul: return (D(n->a) * T(n->b) + T(n->a) * D(n->b)).root();
        case Op::Div:
            return ((D(n->a) * T(n->b) - T(n->a) * D(n->b)) / (T(n->b) * T(n->b))).root();
        case Op::Pow: {
            if (n->b->op == Op::Constant) {
                double c = n->b->value;
                if (c == 0.0) return C(0.0).root();
                // c u^(c-1) u'
                return (C(c) * pow(T(n->a), C(c - 1.0)) * D(n->a)).root();
            }
            // u^v (v' log u + v u'/u)
            return (pow(T(n->a), T(n->b)) *
                    (D(n->b) * log(T(n->a)) + T(n->b) * D(n->a) / T(n->a)))
                .root();
        }
    }
    throw Error("corrupt expression node");
}

}  // namespace detail

inline double ExpressionTree::eval(const Point& x) const {
    if (!root_) throw Error("empty expression");
    return detail::eval_node(root_.get(), x);
}

inline Jet1 ExpressionTree::eval_jet(const Point& x) const {
    if (!root_) throw Error("empty expression");
    auto jv = detail::jet_node(root_.get(), x, arity_);
    return Jet1{jv.v, std::move(jv.d)};
}

inline ExpressionTree ExpressionTree::derivative(int coord) const {
    if (!root_) throw Error("empty expression");
    if (coord < 0 || coord >= arity_) throw Error("derivative coordinate out of range");
    return {detail::diff_node(root_, coord, arity_), arity_};
}

// ---------------------------------------------------------------------------
// Parser
//
// Standard infix grammar: pow (right-assoc) > unary minus > mul/div > add/sub,
// parenthesized calls for {sin, cos, exp, log, sqrt, abs}, "pi" builtin.
// Either parses or raises SyntaxError/UnknownVariable; no other failure mode.
// ---------------------------------------------------------------------------

namespace detail {

struct Tokenizer {
    const std::string& src;
    std::size_t pos = 0;

    void skip_space() {
        while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }
    bool eof() {
        skip_space();
        return pos >= src.size();
    }
    char peek() {
        skip_space();
        return pos < src.size() ? src[pos] : '\0';
    }
};

class Parser {
public:
    Parser(const std::string& text, const Chart& chart) : tk_{text, 0}, chart_(chart) {}

    ExpressionTree run() {
        ExpressionTree e = parse_sum();
        if (!tk_.eof())
            throw SyntaxError("unexpected trailing input", tk_.pos);
        return e;
    }

private:
    Tokenizer tk_;
    const Chart& chart_;

    int arity() const { return chart_.dim(); }

    ExpressionTree parse_sum() {
        ExpressionTree lhs = parse_product();
        for (;;) {
            char c = tk_.peek();
            if (c == '+') {
                ++tk_.pos;
                lhs = lhs + parse_product();
            } else if (c == '-') {
                ++tk_.pos;
                lhs = lhs - parse_product();
            } else {
                return lhs;
            }
        }
    }

    ExpressionTree parse_product() {
        ExpressionTree lhs = parse_unary();
        for (;;) {
            char c = tk_.peek();
            if (c == '*') {
                ++tk_.pos;
                lhs = lhs * parse_unary();
            } else if (c == '/') {
                ++tk_.pos;
                lhs = lhs / parse_unary();
            } else {
                return lhs;
            }
        }
    }

    ExpressionTree parse_unary() {
        if (tk_.peek() == '-') {
            ++tk_.pos;
            return -parse_unary();  // pow binds tighter: -x^2 == -(x^2)
        }
        return parse_power();
    }

    ExpressionTree parse_power() {
        ExpressionTree base = parse_primary();
        if (tk_.peek() == '^') {
            ++tk_.pos;
            // right associative; allow unary minus in the exponent
            ExpressionTree expo = parse_unary_power();
            return pow(base, expo);
        }
        return base;
    }

    ExpressionTree parse_unary_power() {
        if (tk_.peek() == '-') {
            ++tk_.pos;
            return -parse_unary_power();
        }
        return parse_power();
    }

    ExpressionTree parse_primary() {
        char c = tk_.peek();
        std::size_t start = tk_.pos;
        if (c == '(') {
            ++tk_.pos;
            ExpressionTree e = parse_sum();
            if (tk_.peek() != ')') throw SyntaxError("expected ')'", tk_.pos);
            ++tk_.pos;
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident(start);
        if (c == '\0') throw SyntaxError("unexpected end of input", tk_.pos);
        throw SyntaxError(std::string("unexpected character '") + c + "'", tk_.pos);
    }

    ExpressionTree parse_number() {
        const char* begin = tk_.src.c_str() + tk_.pos;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) throw SyntaxError("malformed number", tk_.pos);
        tk_.pos += static_cast<std::size_t>(end - begin);
        return ExpressionTree::constant(v, arity());
    }

    ExpressionTree parse_ident(std::size_t start) {
        std::size_t p = tk_.pos;
        while (p < tk_.src.size() &&
               (std::isalnum(static_cast<unsigned char>(tk_.src[p])) || tk_.src[p] == '_'))
            ++p;
        std::string name = tk_.src.substr(tk_.pos, p - tk_.pos);
        tk_.pos = p;
        if (tk_.peek() == '(') {
            Op op;
            if (name == "sin") op = Op::Sin;
            else if (name == "cos") op = Op::Cos;
            else if (name == "exp") op = Op::Exp;
            else if (name == "log") op = Op::Log;
            else if (name == "sqrt") op = Op::Sqrt;
            else if (name == "abs") op = Op::Abs;
            else throw SyntaxError("unknown function '" + name + "'", start);
            ++tk_.pos;  // '('
            ExpressionTree arg = parse_sum();
            if (tk_.peek() != ')') throw SyntaxError("expected ')' after call argument", tk_.pos);
            ++tk_.pos;
            return apply_unary(op, arg);
        }
        if (name == "pi") return ExpressionTree::constant(3.14159265358979323846, arity());
        int idx = chart_.index_of(name);
        if (idx < 0) throw UnknownVariable(name, start);
        return ExpressionTree::variable(idx, arity());
    }
};

}  // namespace detail

inline ExpressionTree parse_expression(const std::string& text, const Chart& chart) {
    return detail::Parser(text, chart).run();
}

// ---------------------------------------------------------------------------
// Printing (round-trips through the parser to an evaluation-equivalent tree)
// ---------------------------------------------------------------------------

namespace detail {

inline int precedence(Op op) {
    switch (op) {
        case Op::Add: case Op::Sub: return 1;
        case Op::Mul: case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        default: return 5;
    }
}

inline void print_node(const ExprNode* n, const std::vector<std::string>& names,
                       std::string& out) {
    auto paren = [&](const ExprNode* child, bool need) {
        if (need) out += '(';
        print_node(child, names, out);
        if (need) out += ')';
    };
    switch (n->op) {
        case Op::Constant: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", n->value);
            out += buf;
            return;
        }
        case Op::Var:
            out += names[static_cast<std::size_t>(n->var)];
            return;
        case Op::Neg:
            out += '-';
            paren(n->a.get(), precedence(n->a->op) < 3);
            return;
        case Op::Sin: case Op::Cos: case Op::Exp:
        case Op::Log: case Op::Sqrt: case Op::Abs: {
            const char* fn = n->op == Op::Sin ? "sin" : n->op == Op::Cos ? "cos"
                           : n->op == Op::Exp ? "exp" : n->op == Op::Log ? "log"
                           : n->op == Op::Sqrt ? "sqrt" : "abs";
            out += fn;
            out += '(';
            print_node(n->a.get(), names, out);
            out += ')';
            return;
        }
        case Op::Add: case Op::Sub: case Op::Mul: case Op::Div: case Op::Pow: {
            int prec = precedence(n->op);
            char sym = n->op == Op::Add ? '+' : n->op == Op::Sub ? '-'
                     : n->op == Op::Mul ? '*' : n->op == Op::Div ? '/' : '^';
            // ^ is right-associative, the rest left-associative
            bool right_assoc = n->op == Op::Pow;
            paren(n->a.get(), right_assoc ? precedence(n->a->op) <= prec
                                          : precedence(n->a->op) < prec);
            out += sym;
            paren(n->b.get(), right_assoc ? precedence(n->b->op) < prec
                                          : precedence(n->b->op) <= prec);
            return;
        }
    }
}

}  // namespace detail

inline std::string ExpressionTree::to_string(const std::vector<std::string>& names) const {
    if (!root_) return "0";
    std::string out;
    detail::print_node(root_.get(), names, out);
    return out;
}

}  // namespace lhskit
