#include "tunnel/expr.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tunnel {

struct Expression::Node {
    enum class Kind { constant, variable, unary, binary, call } kind;
    double value = 0.0;
    int index = 0;
    char op = 0;
    double (*fn)(double) = nullptr;
    std::shared_ptr<const Node> lhs, rhs;

    double eval(std::span<const double> x) const
    {
        switch (kind) {
        case Kind::constant: return value;
        case Kind::variable: return x[index];
        case Kind::unary: return -lhs->eval(x);
        case Kind::call: return fn(lhs->eval(x));
        case Kind::binary: {
            const double a = lhs->eval(x);
            const double b = rhs->eval(x);
            switch (op) {
            case '+': return a + b;
            case '-': return a - b;
            case '*': return a * b;
            case '/': return a / b;
            default: {
                const double r = std::round(b);
                if (r == b && std::abs(r) <= 16) {
                    double p = 1.0;
                    for (int i = 0; i < std::abs(static_cast<int>(r)); ++i) p *= a;
                    return r < 0 ? 1.0 / p : p;
                }
                return std::pow(a, b);
            }
            }
        }
        }
        return 0.0;
    }

    bool constant() const
    {
        if (kind == Kind::variable) return false;
        if (lhs && !lhs->constant()) return false;
        if (rhs && !rhs->constant()) return false;
        return true;
    }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

double fn_abs(double v) { return std::abs(v); }
double fn_sin(double v) { return std::sin(v); }
double fn_cos(double v) { return std::cos(v); }
double fn_tan(double v) { return std::tan(v); }
double fn_exp(double v) { return std::exp(v); }
double fn_log(double v) { return std::log(v); }
double fn_sqrt(double v) { return std::sqrt(v); }
double fn_sinh(double v) { return std::sinh(v); }
double fn_cosh(double v) { return std::cosh(v); }
double fn_tanh(double v) { return std::tanh(v); }
double fn_acosh(double v) { return std::acosh(v); }
double fn_asinh(double v) { return std::asinh(v); }
double fn_atan(double v) { return std::atan(v); }

struct Parser {
    const std::string& s;
    int dim;
    size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const
    {
        throw std::invalid_argument("expression '" + s + "': " + what + " at position " +
                                    std::to_string(pos));
    }

    void skip()
    {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    bool accept(char c)
    {
        skip();
        if (pos < s.size() && s[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    static NodePtr make_binary(char op, NodePtr a, NodePtr b)
    {
        auto n = std::make_shared<Expression::Node>();
        n->kind = Kind::binary;
        n->op = op;
        n->lhs = std::move(a);
        n->rhs = std::move(b);
        return n;
    }

    NodePtr parse_sum()
    {
        NodePtr lhs = parse_product();
        for (;;) {
            if (accept('+'))
                lhs = make_binary('+', lhs, parse_product());
            else if (accept('-'))
                lhs = make_binary('-', lhs, parse_product());
            else
                return lhs;
        }
    }

    NodePtr parse_product()
    {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (accept('*'))
                lhs = make_binary('*', lhs, parse_unary());
            else if (accept('/'))
                lhs = make_binary('/', lhs, parse_unary());
            else
                return lhs;
        }
    }

    NodePtr parse_unary()
    {
        if (accept('-')) {
            auto n = std::make_shared<Expression::Node>();
            n->kind = Kind::unary;
            n->lhs = parse_unary();
            return n;
        }
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    NodePtr parse_power()
    {
        NodePtr base = parse_atom();
        if (accept('^')) return make_binary('^', base, parse_unary());
        return base;
    }

    NodePtr parse_atom()
    {
        skip();
        if (pos >= s.size()) fail("unexpected end");
        if (accept('(')) {
            NodePtr inner = parse_sum();
            if (!accept(')')) fail("expected ')'");
            return inner;
        }
        const char c = s[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            size_t used = 0;
            double v = std::stod(s.substr(pos), &used);
            pos += used;
            auto n = std::make_shared<Expression::Node>();
            n->kind = Kind::constant;
            n->value = v;
            return n;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            size_t start = pos;
            while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
                ++pos;
            const std::string name = s.substr(start, pos - start);
            return identifier(name);
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr identifier(const std::string& name)
    {
        auto n = std::make_shared<Expression::Node>();
        if (name == "pi") {
            n->kind = Kind::constant;
            n->value = std::numbers::pi;
            return n;
        }
        int var = -1;
        if (name == "x") var = 0;
        else if (name == "y") var = 1;
        else if (name == "z") var = 2;
        else if (name.size() >= 2 && name[0] == 'x' &&
                 name.find_first_not_of("0123456789", 1) == std::string::npos)
            var = std::stoi(name.substr(1)) - 1;
        if (var >= 0 || name[0] == 'x') {
            if (var < 0 || var >= dim) fail("variable '" + name + "' outside dimension " + std::to_string(dim));
            n->kind = Kind::variable;
            n->index = var;
            return n;
        }
        static const std::pair<const char*, double (*)(double)> table[] = {
            {"abs", fn_abs},     {"sin", fn_sin},     {"cos", fn_cos},   {"tan", fn_tan},
            {"exp", fn_exp},     {"log", fn_log},     {"sqrt", fn_sqrt}, {"sinh", fn_sinh},
            {"cosh", fn_cosh},   {"tanh", fn_tanh},   {"arcosh", fn_acosh}, {"acosh", fn_acosh},
            {"asinh", fn_asinh}, {"atan", fn_atan}};
        for (const auto& [key, f] : table) {
            if (name == key) {
                if (!accept('(')) fail("expected '(' after " + name);
                n->kind = Kind::call;
                n->fn = f;
                n->lhs = parse_sum();
                if (!accept(')')) fail("expected ')'");
                return n;
            }
        }
        fail("unknown identifier '" + name + "'");
    }
};

}  // namespace

Expression::Expression(const std::string& source, int dim) : source_(source)
{
    Parser p{source_, dim};
    root_ = p.parse_sum();
    p.skip();
    if (p.pos != source_.size()) p.fail("trailing input");
}

double Expression::operator()(std::span<const double> x) const
{
    if (!root_) return 0.0;
    return root_->eval(x);
}

bool Expression::is_constant() const { return !root_ || root_->constant(); }

}  // namespace tunnel
