#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kbm {

struct ExpressionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parsed arithmetic expression over a fixed list of named variables.
// Grammar: numeric literals, variables, + - * / ^ (right-assoc), unary minus,
// parentheses, exp(), sin(), cos(), abs(), and the constant pi.
class Expression {
  public:
    Expression() = default;

    // Throws ExpressionError with a character position on bad input.
    static Expression parse(const std::string& text, std::span<const std::string> variables);

    double eval(std::span<const double> vars) const;

    // True when the expression folded to a single literal; value() is then
    // its value. Lets integrators skip per-step evaluation.
    bool is_constant() const;
    double constant_value() const;

    const std::string& text() const { return text_; }

  private:
    enum class Op : uint8_t { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Exp, Sin, Cos, Abs };
    struct Node {
        Op op;
        double value = 0.0;  // Const
        int var = -1;        // Var
        int a = -1, b = -1;  // operands
    };

    struct Parser;

    double eval_node(int idx, std::span<const double> vars) const;
    int fold(int idx);

    std::vector<Node> nodes_;
    int root_ = -1;
    std::string text_;
};

}  // namespace kbm
