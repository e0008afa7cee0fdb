#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace taskbench::formula {

class ArithmeticError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exact fraction in lowest terms with a positive denominator.
/// Intermediates are computed in 128 bits; a result that does not fit in
/// 64 bits raises ArithmeticError instead of wrapping.
class Rational {
public:
    constexpr Rational() = default;
    constexpr Rational(std::int64_t value) : num_(value) {}  // NOLINT: implicit by intent
    Rational(std::int64_t num, std::int64_t den);

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    bool is_integer() const { return den_ == 1; }

    friend Rational operator+(const Rational& a, const Rational& b);
    friend Rational operator-(const Rational& a, const Rational& b);
    friend Rational operator*(const Rational& a, const Rational& b);
    friend Rational operator/(const Rational& a, const Rational& b);

    friend bool operator==(const Rational&, const Rational&) = default;
    friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

    std::string to_string() const;

private:
    static Rational reduce(__int128 num, __int128 den);

    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

enum class Op : char { Add = '+', Sub = '-', Mul = '*', Div = '/' };

inline constexpr Op kOps[] = {Op::Add, Op::Sub, Op::Mul, Op::Div};

Rational apply(Op op, const Rational& a, const Rational& b);

/// Immutable expression tree: integer leaves and binary operators only.
class Expr {
public:
    static Expr literal(int value);
    static Expr binary(Op op, Expr left, Expr right);

    bool is_literal() const;
    int value() const;  // literal only
    Op op() const;      // binary only
    const Expr& left() const;
    const Expr& right() const;

    friend bool operator==(const Expr& a, const Expr& b);

private:
    struct Node;
    explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

struct ParsedFormula {
    Expr expr;
    std::optional<std::int64_t> claimed_target;  // from a trailing "= k"
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t position)
        : std::runtime_error(what + " at position " + std::to_string(position)), position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

inline constexpr int kMaxLiteral = 99;

/// Grammar:  formula := sum [ '=' integer ]
///           sum     := product { ('+'|'-') product }
///           product := atom { ('*'|'/') atom }
///           atom    := integer(0..99) | '(' sum ')'
/// Whitespace is ignored between tokens. Throws ParseError.
ParsedFormula parse_formula(std::string_view text);

/// Throws ArithmeticError on division by zero or overflow.
Rational evaluate(const Expr& expr);

/// Prints with the minimum parentheses needed for parse_formula to rebuild the same tree.
std::string to_string(const Expr& expr);

/// Literal values in left-to-right order.
std::vector<int> leaves(const Expr& expr);

enum class Verdict { Correct, WrongTarget, WrongNumbers, Illegal };

std::string_view verdict_name(Verdict v);

/// Illegal (no parse) > WrongNumbers (leaf multiset or "= k" mismatch) > WrongTarget (value or arithmetic error).
Verdict check_formula(std::string_view text, std::span<const int> required_numbers, std::int64_t target);

}  // namespace taskbench::formula
