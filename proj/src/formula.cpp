#include "taskbench/formula.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <numeric>

namespace taskbench::formula {

// ---------------------------------------------------------------------------
// Rational

namespace {

__int128 gcd128(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        const __int128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

constexpr __int128 kMax64 = std::numeric_limits<std::int64_t>::max();

}  // namespace

Rational Rational::reduce(__int128 num, __int128 den) {
    if (den == 0) throw ArithmeticError("division by zero");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const __int128 g = gcd128(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    if (num > kMax64 || num < -kMax64 || den > kMax64) throw ArithmeticError("rational overflow");
    Rational r;
    r.num_ = static_cast<std::int64_t>(num);
    r.den_ = static_cast<std::int64_t>(den);
    return r;
}

Rational::Rational(std::int64_t num, std::int64_t den) {
    *this = reduce(num, den);
}

Rational operator+(const Rational& a, const Rational& b) {
    return Rational::reduce(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
                            static_cast<__int128>(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) {
    return Rational::reduce(static_cast<__int128>(a.num_) * b.den_ - static_cast<__int128>(b.num_) * a.den_,
                            static_cast<__int128>(a.den_) * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
    return Rational::reduce(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw ArithmeticError("division by zero");
    return Rational::reduce(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    const __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
    const __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
    return lhs <=> rhs;
}

std::string Rational::to_string() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational apply(Op op, const Rational& a, const Rational& b) {
    switch (op) {
        case Op::Add: return a + b;
        case Op::Sub: return a - b;
        case Op::Mul: return a * b;
        case Op::Div: return a / b;
    }
    throw std::logic_error("unknown operator");
}

// ---------------------------------------------------------------------------
// Expr

struct Expr::Node {
    int value = 0;
    Op op = Op::Add;
    std::optional<Expr> left;
    std::optional<Expr> right;
};

Expr Expr::literal(int value) {
    if (value < 0) throw std::invalid_argument("literals are non-negative");
    return Expr(std::make_shared<const Node>(Node{value, Op::Add, std::nullopt, std::nullopt}));
}

Expr Expr::binary(Op op, Expr left, Expr right) {
    return Expr(std::make_shared<const Node>(Node{0, op, std::move(left), std::move(right)}));
}

bool Expr::is_literal() const { return !node_->left.has_value(); }
int Expr::value() const { return node_->value; }
Op Expr::op() const { return node_->op; }
const Expr& Expr::left() const { return *node_->left; }
const Expr& Expr::right() const { return *node_->right; }

bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    if (a.is_literal() != b.is_literal()) return false;
    if (a.is_literal()) return a.value() == b.value();
    return a.op() == b.op() && a.left() == b.left() && a.right() == b.right();
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    ParsedFormula parse() {
        Expr expr = sum();
        std::optional<std::int64_t> claimed;
        skip_space();
        if (peek() == '=') {
            ++pos_;
            skip_space();
            claimed = integer(std::numeric_limits<std::int64_t>::max() / 10);
        }
        skip_space();
        if (pos_ != text_.size()) fail("unexpected character");
        return {std::move(expr), claimed};
    }

private:
    Expr sum() {
        Expr lhs = product();
        for (;;) {
            skip_space();
            const char c = peek();
            if (c != '+' && c != '-') return lhs;
            ++pos_;
            lhs = Expr::binary(static_cast<Op>(c), std::move(lhs), product());
        }
    }

    Expr product() {
        Expr lhs = atom();
        for (;;) {
            skip_space();
            const char c = peek();
            if (c != '*' && c != '/') return lhs;
            ++pos_;
            lhs = Expr::binary(static_cast<Op>(c), std::move(lhs), atom());
        }
    }

    Expr atom() {
        skip_space();
        if (peek() == '(') {
            ++pos_;
            Expr inner = sum();
            skip_space();
            if (peek() != ')') fail("expected ')'");
            ++pos_;
            return inner;
        }
        return Expr::literal(static_cast<int>(integer(kMaxLiteral)));
    }

    std::int64_t integer(std::int64_t max_value) {
        const std::size_t start = pos_;
        if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("expected a number");
        std::int64_t v = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) {
            v = v * 10 + (text_[pos_] - '0');
            if (v > max_value) fail_at("number out of range", start);
            ++pos_;
        }
        return v;
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    [[noreturn]] void fail(const std::string& what) const { fail_at(what, pos_); }
    [[noreturn]] static void fail_at(const std::string& what, std::size_t at) { throw ParseError(what, at); }

    std::string_view text_;
    std::size_t pos_ = 0;
};

int precedence(Op op) { return (op == Op::Add || op == Op::Sub) ? 1 : 2; }

void print(const Expr& e, std::string& out) {
    if (e.is_literal()) {
        out += std::to_string(e.value());
        return;
    }
    const int prec = precedence(e.op());
    const bool wrap_left = !e.left().is_literal() && precedence(e.left().op()) < prec;
    // Parsing is left-associative, so any equal-precedence right operand needs brackets.
    const bool wrap_right = !e.right().is_literal() && precedence(e.right().op()) <= prec;
    if (wrap_left) out += '(';
    print(e.left(), out);
    if (wrap_left) out += ')';
    out += static_cast<char>(e.op());
    if (wrap_right) out += '(';
    print(e.right(), out);
    if (wrap_right) out += ')';
}

void collect_leaves(const Expr& e, std::vector<int>& out) {
    if (e.is_literal()) {
        out.push_back(e.value());
        return;
    }
    collect_leaves(e.left(), out);
    collect_leaves(e.right(), out);
}

}  // namespace

ParsedFormula parse_formula(std::string_view text) {
    return Parser(text).parse();
}

Rational evaluate(const Expr& expr) {
    if (expr.is_literal()) return Rational(expr.value());
    return apply(expr.op(), evaluate(expr.left()), evaluate(expr.right()));
}

std::string to_string(const Expr& expr) {
    std::string out;
    print(expr, out);
    return out;
}

std::vector<int> leaves(const Expr& expr) {
    std::vector<int> out;
    collect_leaves(expr, out);
    return out;
}

std::string_view verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Correct: return "correct";
        case Verdict::WrongTarget: return "wrong_target";
        case Verdict::WrongNumbers: return "wrong_numbers";
        case Verdict::Illegal: return "illegal";
    }
    return "unknown";
}

Verdict check_formula(std::string_view text, std::span<const int> required_numbers, std::int64_t target) {
    std::optional<ParsedFormula> parsed;
    try {
        parsed = parse_formula(text);
    } catch (const ParseError&) {
        return Verdict::Illegal;
    }

    std::vector<int> used = leaves(parsed->expr);
    std::vector<int> required(required_numbers.begin(), required_numbers.end());
    std::sort(used.begin(), used.end());
    std::sort(required.begin(), required.end());
    if (used != required) return Verdict::WrongNumbers;
    if (parsed->claimed_target && *parsed->claimed_target != target) return Verdict::WrongNumbers;

    try {
        return evaluate(parsed->expr) == Rational(target) ? Verdict::Correct : Verdict::WrongTarget;
    } catch (const ArithmeticError&) {
        return Verdict::WrongTarget;
    }
}

}  // namespace taskbench::formula
