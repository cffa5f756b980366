#include "kbm/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace kbm {

struct Expression::Parser {
    const std::string& text;
    std::span<const std::string> vars;
    size_t pos = 0;
    std::vector<Node>& nodes;

    [[noreturn]] void fail(const std::string& what) const {
        throw ExpressionError("expression error at position " + std::to_string(pos) + ": " +
                              what + " in \"" + text + "\"");
    }

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    int make(Node n) {
        nodes.push_back(n);
        return static_cast<int>(nodes.size()) - 1;
    }

    int parse_expr() {
        int lhs = parse_term();
        for (;;) {
            skip_ws();
            if (eat('+')) {
                lhs = make({Op::Add, 0, -1, lhs, parse_term()});
            } else if (eat('-')) {
                lhs = make({Op::Sub, 0, -1, lhs, parse_term()});
            } else {
                return lhs;
            }
        }
    }

    int parse_term() {
        int lhs = parse_factor();
        for (;;) {
            skip_ws();
            if (eat('*')) {
                lhs = make({Op::Mul, 0, -1, lhs, parse_factor()});
            } else if (eat('/')) {
                lhs = make({Op::Div, 0, -1, lhs, parse_factor()});
            } else {
                return lhs;
            }
        }
    }

    int parse_factor() {
        skip_ws();
        if (eat('-')) return make({Op::Neg, 0, -1, parse_factor(), -1});
        if (eat('+')) return parse_factor();
        return parse_power();
    }

    int parse_power() {
        int base = parse_atom();
        skip_ws();
        if (eat('^')) return make({Op::Pow, 0, -1, base, parse_factor()});
        return base;
    }

    int parse_atom() {
        skip_ws();
        if (pos >= text.size()) fail("unexpected end of input");
        const char c = text[pos];
        if (c == '(') {
            ++pos;
            int inner = parse_expr();
            if (!eat(')')) fail("missing ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* start = text.c_str() + pos;
            char* end = nullptr;
            const double v = std::strtod(start, &end);
            if (end == start) fail("bad number");
            pos += static_cast<size_t>(end - start);
            return make({Op::Const, v, -1, -1, -1});
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t end = pos;
            while (end < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[end])) || text[end] == '_'))
                ++end;
            const std::string name = text.substr(pos, end - pos);
            pos = end;
            skip_ws();
            if (pos < text.size() && text[pos] == '(') {
                ++pos;
                int arg = parse_expr();
                if (!eat(')')) fail("missing ')' after " + name);
                if (name == "exp") return make({Op::Exp, 0, -1, arg, -1});
                if (name == "sin") return make({Op::Sin, 0, -1, arg, -1});
                if (name == "cos") return make({Op::Cos, 0, -1, arg, -1});
                if (name == "abs") return make({Op::Abs, 0, -1, arg, -1});
                fail("unknown function '" + name + "'");
            }
            if (name == "pi") return make({Op::Const, 3.14159265358979323846, -1, -1, -1});
            for (size_t i = 0; i < vars.size(); ++i) {
                if (vars[i] == name)
                    return make({Op::Var, 0, static_cast<int>(i), -1, -1});
            }
            fail("unknown variable '" + name + "'");
        }
        fail(std::string("unexpected character '") + c + "'");
    }
};

Expression Expression::parse(const std::string& text, std::span<const std::string> variables) {
    Expression e;
    e.text_ = text;
    Parser p{text, variables, 0, e.nodes_};
    e.root_ = p.parse_expr();
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing input");
    e.root_ = e.fold(e.root_);
    return e;
}

double Expression::eval_node(int idx, std::span<const double> vars) const {
    const Node& n = nodes_[static_cast<size_t>(idx)];
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Var: return vars[static_cast<size_t>(n.var)];
        case Op::Add: return eval_node(n.a, vars) + eval_node(n.b, vars);
        case Op::Sub: return eval_node(n.a, vars) - eval_node(n.b, vars);
        case Op::Mul: return eval_node(n.a, vars) * eval_node(n.b, vars);
        case Op::Div: return eval_node(n.a, vars) / eval_node(n.b, vars);
        case Op::Pow: return std::pow(eval_node(n.a, vars), eval_node(n.b, vars));
        case Op::Neg: return -eval_node(n.a, vars);
        case Op::Exp: return std::exp(eval_node(n.a, vars));
        case Op::Sin: return std::sin(eval_node(n.a, vars));
        case Op::Cos: return std::cos(eval_node(n.a, vars));
        case Op::Abs: return std::abs(eval_node(n.a, vars));
    }
    return 0.0;
}

double Expression::eval(std::span<const double> vars) const { return eval_node(root_, vars); }

// Bottom-up constant folding; rewrites subtrees whose children are Const.
int Expression::fold(int idx) {
    Node& n = nodes_[static_cast<size_t>(idx)];
    if (n.op == Op::Const || n.op == Op::Var) return idx;
    n.a = fold(n.a);
    if (n.b >= 0) n.b = fold(n.b);
    const bool a_const = nodes_[static_cast<size_t>(n.a)].op == Op::Const;
    const bool b_const = n.b < 0 || nodes_[static_cast<size_t>(n.b)].op == Op::Const;
    if (a_const && b_const) {
        const double v = eval_node(idx, {});
        nodes_[static_cast<size_t>(idx)] = {Op::Const, v, -1, -1, -1};
    }
    return idx;
}

bool Expression::is_constant() const {
    return root_ >= 0 && nodes_[static_cast<size_t>(root_)].op == Op::Const;
}

double Expression::constant_value() const { return nodes_[static_cast<size_t>(root_)].value; }

}  // namespace kbm
