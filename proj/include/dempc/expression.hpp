#pragma once

// Arithmetic expressions over the variables {x, u}: parsing, printing and
// evaluation. Used by scalar problem configurations that specify dynamics
// or stage cost as text instead of the built-in parametric families.
//
// Grammar (loosest binding first):
//   expr   := term  (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | power
//   power  := primary ('^' integer)?
//   primary:= number | 'x' | 'u' | '(' expr ')'
//
// '^' only accepts a nonnegative integer literal exponent, which keeps
// evaluation total on the reals.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace dempc {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t position)
        : std::runtime_error(what + " (at position " + std::to_string(position) + ")"),
          position_(position) {}

    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

class Expression {
public:
    enum class Op { constant, var_x, var_u, add, sub, mul, div, neg, pow };

    struct Node {
        Op op = Op::constant;
        double value = 0.0;       // constant
        int exponent = 0;         // pow
        std::shared_ptr<const Node> lhs;
        std::shared_ptr<const Node> rhs;
    };

    Expression() = default;

    static Expression parse(const std::string& text);

    double operator()(double x, double u) const {
        if (!root_) throw std::logic_error("empty expression");
        return eval(*root_, x, u);
    }

    std::string str() const { return root_ ? print(*root_, 0) : std::string(); }

    bool operator==(const Expression& other) const {
        return equal(root_.get(), other.root_.get());
    }

private:
    explicit Expression(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

    using NodePtr = std::shared_ptr<const Node>;

    static NodePtr make(Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
        auto n = std::make_shared<Node>();
        n->op = op;
        n->lhs = std::move(lhs);
        n->rhs = std::move(rhs);
        return n;
    }

    static double eval(const Node& n, double x, double u) {
        switch (n.op) {
            case Op::constant: return n.value;
            case Op::var_x: return x;
            case Op::var_u: return u;
            case Op::add: return eval(*n.lhs, x, u) + eval(*n.rhs, x, u);
            case Op::sub: return eval(*n.lhs, x, u) - eval(*n.rhs, x, u);
            case Op::mul: return eval(*n.lhs, x, u) * eval(*n.rhs, x, u);
            case Op::div: return eval(*n.lhs, x, u) / eval(*n.rhs, x, u);
            case Op::neg: return -eval(*n.lhs, x, u);
            case Op::pow: {
                double base = eval(*n.lhs, x, u);
                double r = 1.0;
                for (int i = 0; i < n.exponent; ++i) r *= base;
                return r;
            }
        }
        return 0.0;
    }

    static bool equal(const Node* a, const Node* b) {
        if (a == b) return true;
        if (!a || !b) return false;
        if (a->op != b->op) return false;
        if (a->op == Op::constant) return a->value == b->value;
        if (a->op == Op::pow && a->exponent != b->exponent) return false;
        return equal(a->lhs.get(), b->lhs.get()) && equal(a->rhs.get(), b->rhs.get());
    }

    // Precedence levels: 0 add/sub, 1 mul/div, 2 neg, 3 pow, 4 atoms.
    static int precedence(const Node& n) {
        switch (n.op) {
            case Op::add:
            case Op::sub: return 0;
            case Op::mul:
            case Op::div: return 1;
            case Op::neg: return 2;
            case Op::pow: return 3;
            default: return 4;
        }
    }

    static std::string print(const Node& n, int parent_prec) {
        std::string s;
        int prec = precedence(n);
        switch (n.op) {
            case Op::constant: {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.17g", n.value);
                s = buf;
                break;
            }
            case Op::var_x: s = "x"; break;
            case Op::var_u: s = "u"; break;
            case Op::add: s = print(*n.lhs, prec) + "+" + print(*n.rhs, prec + 1); break;
            case Op::sub: s = print(*n.lhs, prec) + "-" + print(*n.rhs, prec + 1); break;
            case Op::mul: s = print(*n.lhs, prec) + "*" + print(*n.rhs, prec + 1); break;
            case Op::div: s = print(*n.lhs, prec) + "/" + print(*n.rhs, prec + 1); break;
            case Op::neg: s = "-" + print(*n.lhs, prec); break;
            case Op::pow:
                // The base of '^' is always printed parenthesized unless atomic.
                s = print(*n.lhs, 4) + "^" + std::to_string(n.exponent);
                break;
        }
        if (prec < parent_prec) s = "(" + s + ")";
        return s;
    }

    class Parser {
    public:
        explicit Parser(const std::string& text) : text_(text) {}

        NodePtr run() {
            NodePtr e = expr();
            skip_ws();
            if (pos_ != text_.size())
                throw ParseError("unexpected character '" + std::string(1, text_[pos_]) + "'", pos_);
            return e;
        }

    private:
        const std::string& text_;
        std::size_t pos_ = 0;

        void skip_ws() {
            while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        }

        char peek() {
            skip_ws();
            return pos_ < text_.size() ? text_[pos_] : '\0';
        }

        bool accept(char c) {
            if (peek() == c) {
                ++pos_;
                return true;
            }
            return false;
        }

        NodePtr expr() {
            NodePtr lhs = term();
            for (;;) {
                if (accept('+')) {
                    lhs = make(Op::add, lhs, term());
                } else if (accept('-')) {
                    lhs = make(Op::sub, lhs, term());
                } else {
                    return lhs;
                }
            }
        }

        NodePtr term() {
            NodePtr lhs = unary();
            for (;;) {
                if (accept('*')) {
                    lhs = make(Op::mul, lhs, unary());
                } else if (accept('/')) {
                    lhs = make(Op::div, lhs, unary());
                } else {
                    return lhs;
                }
            }
        }

        NodePtr unary() {
            if (accept('-')) return make(Op::neg, unary());
            return power();
        }

        NodePtr power() {
            NodePtr base = primary();
            if (accept('^')) {
                skip_ws();
                std::size_t start = pos_;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
                if (pos_ == start)
                    throw ParseError("exponent must be a nonnegative integer literal", start);
                auto n = std::make_shared<Node>();
                n->op = Op::pow;
                n->exponent = std::stoi(text_.substr(start, pos_ - start));
                n->lhs = base;
                return n;
            }
            return base;
        }

        NodePtr primary() {
            char c = peek();
            if (c == '\0') throw ParseError("empty operand", pos_);
            if (c == '(') {
                std::size_t open = pos_;
                ++pos_;
                NodePtr e = expr();
                if (!accept(')')) throw ParseError("unbalanced parenthesis", open);
                return e;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t start = pos_;
                while (pos_ < text_.size() &&
                       (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                    ++pos_;
                std::string id = text_.substr(start, pos_ - start);
                auto n = std::make_shared<Node>();
                if (id == "x") {
                    n->op = Op::var_x;
                } else if (id == "u") {
                    n->op = Op::var_u;
                } else {
                    throw ParseError("unknown identifier '" + id + "'", start);
                }
                return n;
            }
            throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_);
        }

        NodePtr number() {
            std::size_t start = pos_;
            const char* begin = text_.c_str() + start;
            char* end = nullptr;
            double v = std::strtod(begin, &end);
            if (end == begin) throw ParseError("invalid number", start);
            pos_ = start + static_cast<std::size_t>(end - begin);
            auto n = std::make_shared<Node>();
            n->op = Op::constant;
            n->value = v;
            return n;
        }
    };

    NodePtr root_;
};

inline Expression Expression::parse(const std::string& text) {
    std::size_t i = 0;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size()) throw ParseError("empty expression", 0);
    return Expression(Parser(text).run());
}

inline Expression parse_expression(const std::string& text) { return Expression::parse(text); }

}  // namespace dempc
