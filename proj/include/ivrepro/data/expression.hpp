#pragma once

#include "ivrepro/data/table.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace ivrepro::data {

/// Comparison semantics for missing values. Stata orders missing above every
/// number; R propagates NA through comparisons.
enum class Dialect { Stata, R };

struct Expr {
    enum class Kind { Number, String, Column, Unary, Binary, Call };
    Kind kind = Kind::Number;
    double number = 0;
    std::string text;  // string literal, column name, operator, or function name
    std::vector<std::shared_ptr<const Expr>> args;
};
using ExprPtr = std::shared_ptr<const Expr>;

/// Parses arithmetic, comparison and boolean expressions with function calls.
/// The token `e(sample)` is read as a column reference. Throws
/// ConditionParseError on malformed input.
ExprPtr parse_expression(std::string_view text);

/// Column names referenced anywhere in the expression, in first-seen order.
std::vector<std::string> referenced_columns(const Expr& expr);

[[nodiscard]] bool is_bare_identifier(const Expr& expr) noexcept;

/// Maps a referenced name onto a table column (after name resolution).
using ColumnLookup = std::function<const Column&(const std::string&)>;

/// Evaluates to one value per row, NaN for missing. Booleans are 0/1.
Eigen::VectorXd evaluate(const Expr& expr, const ColumnLookup& lookup, Eigen::Index rows,
                         Dialect dialect = Dialect::Stata);

}  // namespace ivrepro::data
