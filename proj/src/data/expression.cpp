#include "ivrepro/data/expression.hpp"

#include "ivrepro/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <variant>

namespace ivrepro::data {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Token {
    enum class Kind { Number, String, Ident, Op, End } kind = Kind::End;
    std::string text;
    double number = 0;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_space();
            if (pos_ >= src_.size()) break;
            const char c = src_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
                out.push_back(number());
            } else if (c == '"' || c == '\'') {
                out.push_back(string(c));
            } else if (c == '`') {
                // R backtick-quoted name
                const auto close = src_.find('`', pos_ + 1);
                if (close == std::string_view::npos) fail(ErrorCode::ConditionParseError, "unterminated backtick");
                out.push_back({Token::Kind::Ident, std::string(src_.substr(pos_ + 1, close - pos_ - 1))});
                pos_ = close + 1;
            } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                out.push_back(ident());
            } else {
                out.push_back(op());
            }
        }
        out.push_back({Token::Kind::End, ""});
        return out;
    }

private:
    void skip_space() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    Token number() {
        std::size_t end = pos_;
        while (end < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[end])) || src_[end] == '.' || src_[end] == 'e' ||
                src_[end] == 'E' ||
                ((src_[end] == '-' || src_[end] == '+') && (src_[end - 1] == 'e' || src_[end - 1] == 'E')))) {
            ++end;
        }
        Token t{Token::Kind::Number, std::string(src_.substr(pos_, end - pos_))};
        auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
        if (ec != std::errc{} || ptr != t.text.data() + t.text.size()) {
            fail(ErrorCode::ConditionParseError, "bad number '" + t.text + "'");
        }
        pos_ = end;
        return t;
    }

    Token string(char quote) {
        const auto close = src_.find(quote, pos_ + 1);
        if (close == std::string_view::npos) fail(ErrorCode::ConditionParseError, "unterminated string");
        Token t{Token::Kind::String, std::string(src_.substr(pos_ + 1, close - pos_ - 1))};
        pos_ = close + 1;
        return t;
    }

    Token ident() {
        std::size_t end = pos_;
        while (end < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_' ||
                                     src_[end] == '.' || src_[end] == '$')) {
            ++end;
        }
        std::string name(src_.substr(pos_, end - pos_));
        pos_ = end;
        // Stata's stored estimation sample.
        if (name == "e" && src_.substr(pos_, 8) == "(sample)") {
            pos_ += 8;
            return {Token::Kind::Ident, "e(sample)"};
        }
        // R data-frame access df$var -> var
        if (const auto dollar = name.rfind('$'); dollar != std::string::npos) name = name.substr(dollar + 1);
        return {Token::Kind::Ident, name};
    }

    Token op() {
        static constexpr std::string_view two[] = {"==", "!=", "~=", "<=", ">=", "&&", "||"};
        for (auto candidate : two) {
            if (src_.substr(pos_, 2) == candidate) {
                pos_ += 2;
                return {Token::Kind::Op, std::string(candidate)};
            }
        }
        const char c = src_[pos_];
        if (std::string_view("+-*/^()<>&|!~,").find(c) == std::string_view::npos) {
            fail(ErrorCode::ConditionParseError, std::string("unexpected character '") + c + "'");
        }
        ++pos_;
        return {Token::Kind::Op, std::string(1, c)};
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

ExprPtr make(Expr::Kind kind, std::string text, std::vector<ExprPtr> args = {}, double number = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->text = std::move(text);
    e->args = std::move(args);
    e->number = number;
    return e;
}

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    ExprPtr parse() {
        auto e = parse_or();
        if (peek().kind != Token::Kind::End) fail(ErrorCode::ConditionParseError, "trailing input at '" + peek().text + "'");
        return e;
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    bool accept_op(std::string_view op) {
        if (peek().kind == Token::Kind::Op && peek().text == op) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect_op(std::string_view op) {
        if (!accept_op(op)) fail(ErrorCode::ConditionParseError, "expected '" + std::string(op) + "'");
    }

    ExprPtr parse_or() {
        auto lhs = parse_and();
        while (accept_op("|") || accept_op("||")) lhs = make(Expr::Kind::Binary, "|", {lhs, parse_and()});
        return lhs;
    }
    ExprPtr parse_and() {
        auto lhs = parse_not();
        while (accept_op("&") || accept_op("&&")) lhs = make(Expr::Kind::Binary, "&", {lhs, parse_not()});
        return lhs;
    }
    ExprPtr parse_not() {
        if (accept_op("!") || accept_op("~")) return make(Expr::Kind::Unary, "!", {parse_not()});
        return parse_cmp();
    }
    ExprPtr parse_cmp() {
        auto lhs = parse_add();
        static constexpr std::string_view ops[] = {"==", "!=", "~=", "<=", ">=", "<", ">"};
        for (auto op : ops) {
            if (accept_op(op)) {
                const std::string norm = op == "~=" ? "!=" : std::string(op);
                return make(Expr::Kind::Binary, norm, {lhs, parse_add()});
            }
        }
        return lhs;
    }
    ExprPtr parse_add() {
        auto lhs = parse_mul();
        while (true) {
            if (accept_op("+")) lhs = make(Expr::Kind::Binary, "+", {lhs, parse_mul()});
            else if (accept_op("-")) lhs = make(Expr::Kind::Binary, "-", {lhs, parse_mul()});
            else return lhs;
        }
    }
    ExprPtr parse_mul() {
        auto lhs = parse_unary();
        while (true) {
            if (accept_op("*")) lhs = make(Expr::Kind::Binary, "*", {lhs, parse_unary()});
            else if (accept_op("/")) lhs = make(Expr::Kind::Binary, "/", {lhs, parse_unary()});
            else return lhs;
        }
    }
    ExprPtr parse_unary() {
        if (accept_op("-")) return make(Expr::Kind::Unary, "-", {parse_unary()});
        if (accept_op("+")) return parse_unary();
        return parse_pow();
    }
    ExprPtr parse_pow() {
        auto base = parse_primary();
        if (accept_op("^")) return make(Expr::Kind::Binary, "^", {base, parse_unary()});
        return base;
    }
    ExprPtr parse_primary() {
        const Token t = peek();
        switch (t.kind) {
            case Token::Kind::Number: ++pos_; return make(Expr::Kind::Number, t.text, {}, t.number);
            case Token::Kind::String: ++pos_; return make(Expr::Kind::String, t.text);
            case Token::Kind::Ident: {
                ++pos_;
                if (t.text == "TRUE" || t.text == "T") return make(Expr::Kind::Number, t.text, {}, 1.0);
                if (t.text == "FALSE" || t.text == "F") return make(Expr::Kind::Number, t.text, {}, 0.0);
                if (accept_op("(")) {
                    std::vector<ExprPtr> args;
                    if (!accept_op(")")) {
                        do {
                            args.push_back(parse_or());
                        } while (accept_op(","));
                        expect_op(")");
                    }
                    return make(Expr::Kind::Call, t.text, std::move(args));
                }
                return make(Expr::Kind::Column, t.text);
            }
            case Token::Kind::Op:
                if (accept_op("(")) {
                    auto inner = parse_or();
                    expect_op(")");
                    return inner;
                }
                // Stata system missing "." is lexed as an op only when alone.
                break;
            case Token::Kind::End: break;
        }
        fail(ErrorCode::ConditionParseError, t.text.empty() ? "unexpected end of expression" : "unexpected '" + t.text + "'");
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

// Per-row values: numeric, or strings for string-typed columns and literals.
using Value = std::variant<Eigen::VectorXd, std::vector<std::string>>;

bool is_numeric(const Value& v) { return std::holds_alternative<Eigen::VectorXd>(v); }

class Evaluator {
public:
    Evaluator(const ColumnLookup& lookup, Eigen::Index rows, Dialect dialect)
        : lookup_(lookup), rows_(rows), dialect_(dialect) {}

    Value eval(const Expr& e) {
        switch (e.kind) {
            case Expr::Kind::Number: return Eigen::VectorXd::Constant(rows_, e.number);
            case Expr::Kind::String:
                return std::vector<std::string>(static_cast<std::size_t>(rows_), e.text);
            case Expr::Kind::Column: {
                const Column& col = lookup_(e.text);
                if (col.size() != rows_) fail(ErrorCode::ConditionParseError, "column length mismatch for " + e.text);
                if (col.kind != ColumnKind::String) return col.values;
                std::vector<std::string> out(static_cast<std::size_t>(rows_));
                for (Eigen::Index i = 0; i < rows_; ++i) out[static_cast<std::size_t>(i)] = col.is_missing(i) ? "" : col.label(i);
                return out;
            }
            case Expr::Kind::Unary: return unary(e);
            case Expr::Kind::Binary: return binary(e);
            case Expr::Kind::Call: return call(e);
        }
        return Eigen::VectorXd::Constant(rows_, kNaN);
    }

    Eigen::VectorXd numeric(const Expr& e) {
        auto v = eval(e);
        if (!is_numeric(v)) fail(ErrorCode::ConditionParseError, "string value used in numeric context");
        return std::get<Eigen::VectorXd>(std::move(v));
    }

private:
    static bool truthy(double v, Dialect d) { return d == Dialect::Stata ? (std::isnan(v) || v != 0) : v != 0; }

    Value unary(const Expr& e) {
        Eigen::VectorXd x = numeric(*e.args[0]);
        if (e.text == "-") return Eigen::VectorXd(-x);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (std::isnan(x[i]) && dialect_ == Dialect::R) continue;
            x[i] = truthy(x[i], dialect_) ? 0.0 : 1.0;
        }
        return x;
    }

    // Stata orders missing after all numbers.
    double cmp_key(double v) const {
        return (dialect_ == Dialect::Stata && std::isnan(v)) ? std::numeric_limits<double>::infinity() : v;
    }

    Value binary(const Expr& e) {
        const std::string& op = e.text;
        Value lv = eval(*e.args[0]);
        Value rv = eval(*e.args[1]);
        const bool comparison = op == "==" || op == "!=" || op == "<" || op == "<=" || op == ">" || op == ">=";
        if (comparison && (!is_numeric(lv) || !is_numeric(rv))) {
            if (is_numeric(lv) || is_numeric(rv)) fail(ErrorCode::ConditionParseError, "type mismatch in '" + op + "'");
            const auto& a = std::get<std::vector<std::string>>(lv);
            const auto& b = std::get<std::vector<std::string>>(rv);
            Eigen::VectorXd out(rows_);
            for (Eigen::Index i = 0; i < rows_; ++i) {
                const auto c = a[static_cast<std::size_t>(i)].compare(b[static_cast<std::size_t>(i)]);
                out[i] = compare(op, c);
            }
            return out;
        }
        if (!is_numeric(lv) || !is_numeric(rv)) fail(ErrorCode::ConditionParseError, "string operand to '" + op + "'");
        const auto& a = std::get<Eigen::VectorXd>(lv);
        const auto& b = std::get<Eigen::VectorXd>(rv);
        Eigen::VectorXd out(rows_);
        for (Eigen::Index i = 0; i < rows_; ++i) {
            const double x = a[i];
            const double y = b[i];
            if (comparison) {
                if (dialect_ == Dialect::R && (std::isnan(x) || std::isnan(y))) {
                    out[i] = kNaN;
                    continue;
                }
                const double kx = cmp_key(x);
                const double ky = cmp_key(y);
                out[i] = compare(op, kx < ky ? -1 : (kx > ky ? 1 : 0));
            } else if (op == "&" || op == "|") {
                if (dialect_ == Dialect::R && (std::isnan(x) || std::isnan(y))) {
                    // NA & FALSE is FALSE, NA | TRUE is TRUE
                    const bool xf = !std::isnan(x) && x == 0;
                    const bool yf = !std::isnan(y) && y == 0;
                    const bool xt = !std::isnan(x) && x != 0;
                    const bool yt = !std::isnan(y) && y != 0;
                    if (op == "&") out[i] = (xf || yf) ? 0.0 : kNaN;
                    else out[i] = (xt || yt) ? 1.0 : kNaN;
                    continue;
                }
                const bool tx = truthy(x, dialect_);
                const bool ty = truthy(y, dialect_);
                out[i] = (op == "&" ? (tx && ty) : (tx || ty)) ? 1.0 : 0.0;
            } else if (op == "+") {
                out[i] = x + y;
            } else if (op == "-") {
                out[i] = x - y;
            } else if (op == "*") {
                out[i] = x * y;
            } else if (op == "/") {
                out[i] = y == 0 ? kNaN : x / y;
            } else if (op == "^") {
                out[i] = std::pow(x, y);
            } else {
                fail(ErrorCode::ConditionParseError, "unknown operator '" + op + "'");
            }
        }
        return out;
    }

    static double compare(const std::string& op, int c) {
        bool r = false;
        if (op == "==") r = c == 0;
        else if (op == "!=") r = c != 0;
        else if (op == "<") r = c < 0;
        else if (op == "<=") r = c <= 0;
        else if (op == ">") r = c > 0;
        else if (op == ">=") r = c >= 0;
        return r ? 1.0 : 0.0;
    }

    Value call(const Expr& e) {
        std::string fn = e.text;
        std::transform(fn.begin(), fn.end(), fn.begin(), [](unsigned char c) { return std::tolower(c); });
        const auto nargs = e.args.size();
        auto need = [&](std::size_t n) {
            if (nargs != n) fail(ErrorCode::ConditionParseError, e.text + "() takes " + std::to_string(n) + " argument(s)");
        };
        auto map1 = [&](auto f) {
            need(1);
            Eigen::VectorXd x = numeric(*e.args[0]);
            for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::isnan(x[i]) ? kNaN : f(x[i]);
            return Value(std::move(x));
        };
        if (fn == "log" || fn == "ln") return map1([](double v) { return v > 0 ? std::log(v) : kNaN; });
        if (fn == "log10") return map1([](double v) { return v > 0 ? std::log10(v) : kNaN; });
        if (fn == "exp") return map1([](double v) { return std::exp(v); });
        if (fn == "sqrt") return map1([](double v) { return v >= 0 ? std::sqrt(v) : kNaN; });
        if (fn == "abs") return map1([](double v) { return std::abs(v); });
        if (fn == "zero1") {
            need(1);
            Eigen::VectorXd x = numeric(*e.args[0]);
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                if (std::isnan(x[i])) continue;
                lo = std::min(lo, x[i]);
                hi = std::max(hi, x[i]);
            }
            const double range = hi - lo;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                if (!std::isnan(x[i])) x[i] = range > 0 ? (x[i] - lo) / range : 0.0;
            }
            return x;
        }
        if (fn == "missing" || fn == "is.na") {
            if (nargs == 0) fail(ErrorCode::ConditionParseError, e.text + "() needs arguments");
            Eigen::VectorXd out = Eigen::VectorXd::Zero(rows_);
            for (const auto& arg : e.args) {
                Value v = eval(*arg);
                for (Eigen::Index i = 0; i < rows_; ++i) {
                    const bool miss = is_numeric(v) ? std::isnan(std::get<Eigen::VectorXd>(v)[i])
                                                    : std::get<std::vector<std::string>>(v)[static_cast<std::size_t>(i)].empty();
                    if (miss) out[i] = 1.0;
                }
            }
            return out;
        }
        if (fn == "inrange") {
            need(3);
            const Eigen::VectorXd x = numeric(*e.args[0]);
            const Eigen::VectorXd lo = numeric(*e.args[1]);
            const Eigen::VectorXd hi = numeric(*e.args[2]);
            Eigen::VectorXd out(rows_);
            for (Eigen::Index i = 0; i < rows_; ++i) {
                const double k = cmp_key(x[i]);
                out[i] = (k >= cmp_key(lo[i]) && k <= cmp_key(hi[i])) ? 1.0 : 0.0;
            }
            return out;
        }
        if (fn == "inlist") {
            if (nargs < 2) fail(ErrorCode::ConditionParseError, "inlist() needs at least two arguments");
            Value x = eval(*e.args[0]);
            Eigen::VectorXd out = Eigen::VectorXd::Zero(rows_);
            for (std::size_t a = 1; a < nargs; ++a) {
                Value y = eval(*e.args[a]);
                if (is_numeric(x) != is_numeric(y)) fail(ErrorCode::ConditionParseError, "type mismatch in inlist()");
                for (Eigen::Index i = 0; i < rows_; ++i) {
                    const auto u = static_cast<std::size_t>(i);
                    const bool eq = is_numeric(x)
                                        ? cmp_key(std::get<Eigen::VectorXd>(x)[i]) == cmp_key(std::get<Eigen::VectorXd>(y)[i])
                                        : std::get<std::vector<std::string>>(x)[u] == std::get<std::vector<std::string>>(y)[u];
                    if (eq) out[i] = 1.0;
                }
            }
            return out;
        }
        fail(ErrorCode::ConditionParseError, "unsupported function " + e.text + "()");
    }

    const ColumnLookup& lookup_;
    Eigen::Index rows_;
    Dialect dialect_;
};

void collect(const Expr& e, std::vector<std::string>& out) {
    if (e.kind == Expr::Kind::Column && std::find(out.begin(), out.end(), e.text) == out.end()) out.push_back(e.text);
    for (const auto& a : e.args) collect(*a, out);
}

}  // namespace

ExprPtr parse_expression(std::string_view text) {
    // A lone "." is Stata's system missing value.
    std::string src;
    src.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        const bool lone_dot = c == '.' && (i + 1 >= text.size() || !std::isalnum(static_cast<unsigned char>(text[i + 1]))) &&
                              (i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1])));
        if (lone_dot) src += "(0/0)";
        else src.push_back(c);
    }
    Lexer lexer(src);
    Parser parser(lexer.run());
    return parser.parse();
}

std::vector<std::string> referenced_columns(const Expr& expr) {
    std::vector<std::string> out;
    collect(expr, out);
    return out;
}

bool is_bare_identifier(const Expr& expr) noexcept { return expr.kind == Expr::Kind::Column; }

Eigen::VectorXd evaluate(const Expr& expr, const ColumnLookup& lookup, Eigen::Index rows, Dialect dialect) {
    Evaluator ev(lookup, rows, dialect);
    return ev.numeric(expr);
}

}  // namespace ivrepro::data
