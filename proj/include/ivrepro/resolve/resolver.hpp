#pragma once

#include "ivrepro/data/table.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ivrepro::resolve {

struct ColumnCatalog {
    std::vector<std::string> names;
    std::vector<data::ColumnKind> kinds;
    Eigen::Index rows = 0;

    static ColumnCatalog of(const data::DataTable& table);
    static ColumnCatalog of_names(std::vector<std::string> names);
};

enum class Tier { Exact, CaseInsensitive, EditDistance, Prefix, Derived, Unresolved };

std::string_view to_string(Tier tier) noexcept;

struct PanelSpec {
    std::string unit;  // empty for a pure time series
    std::string time;
};

/// One time-series operator: L (lag), F (lead) or D (difference), applied k times.
struct TsOp {
    char op = 'L';
    int k = 1;
    bool operator==(const TsOp&) const = default;
};

struct TsRecipe {
    std::string base;  // resolved column
    std::vector<TsOp> ops;  // innermost first

    /// e.g. "shift(nbi_i, 1)" or "diff(shift(x, 2), 1)".
    [[nodiscard]] std::string describe() const;
};

struct Resolution {
    std::string query;
    std::optional<std::string> column;
    std::optional<TsRecipe> recipe;
    Tier tier = Tier::Unresolved;
    std::optional<int> distance;
    std::string note;

    [[nodiscard]] bool resolved() const noexcept { return tier != Tier::Unresolved; }
};

nlohmann::json to_json(const Resolution& r);

/// exact -> case-insensitive -> Levenshtein <= 2 -> prefix. A tier only wins
/// with a unique best match.
Resolution resolve_column(std::string_view term, const ColumnCatalog& catalog);

/// Parses an operator prefix such as "L2D." or "l4." Returns empty when the
/// term carries no time-series operator.
std::optional<std::pair<std::vector<TsOp>, std::string>> parse_ts_term(std::string_view term);

/// Looks for realized encodings (l4x, l4_x) before falling back to a recipe.
/// With `table` given, an encoded column with more missing values than the
/// recipe would produce is replaced by the recipe. Throws PanelRequired when a
/// recipe is needed and no panel is known.
Resolution resolve_ts_term(std::string_view term, const ColumnCatalog& catalog, const std::optional<PanelSpec>& panel,
                           const data::DataTable* table = nullptr);

/// Applies a recipe with Stata time-series semantics: L k at time t reads the
/// same unit at t - k; gaps give missing.
Eigen::VectorXd apply_recipe(const TsRecipe& recipe, const data::DataTable& table, const PanelSpec& panel);

/// i.x: returns existing _Ix_<level> dummies, else appends one 0/1 column per
/// level except the lowest-sorting one. Throws DegenerateFactor.
std::vector<std::string> expand_factor(std::string_view term, data::DataTable& table);

/// zero1(.), log(.) and arithmetic over columns. The new column is named by
/// the expression text with spaces removed. Throws NotAnExpression or
/// UnresolvedOperand.
std::string materialize_expression(std::string_view expr, data::DataTable& table);

/// Whitespace tokens; "a.b" splits when both a and b are columns.
std::vector<std::string> split_cluster_spec(std::string_view s, const ColumnCatalog& catalog);

/// Resolves any specification term to table columns, materializing lags,
/// factors, interactions and expressions in `table`. Appends to `audit`.
/// Throws UnresolvedTerm.
std::vector<std::string> resolve_term(std::string_view term, data::DataTable& table, const std::optional<PanelSpec>& panel,
                                      std::vector<Resolution>& audit);

std::size_t levenshtein(std::string_view a, std::string_view b);

}  // namespace ivrepro::resolve
