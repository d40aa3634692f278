#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tunnel {

// Compiled arithmetic expression in the variables x1..xd (x, y, z alias x1, x2, x3).
// Grammar: + - * / ^, unary minus, parentheses, pi, and the functions
// sin cos tan exp log sqrt abs sinh cosh tanh arcosh asinh atan.
class Expression {
public:
    Expression() = default;
    Expression(const std::string& source, int dim);

    double operator()(std::span<const double> x) const;
    const std::string& source() const { return source_; }
    bool is_constant() const;

    struct Node;

private:
    std::string source_;
    std::shared_ptr<const Node> root_;
};

}  // namespace tunnel
