#include "ivrepro/resolve/resolver.hpp"

#include "ivrepro/data/expression.hpp"
#include "ivrepro/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <regex>
#include <set>

namespace ivrepro::resolve {

using data::Column;
using data::ColumnKind;
using data::DataTable;
using Eigen::Index;
using Eigen::VectorXd;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// backticks, quotes and leading underscores do not distinguish names
std::string strip_quoting(std::string_view s) {
    std::string t = trim(s);
    while (t.size() >= 2 && ((t.front() == '`' && t.back() == '`') || (t.front() == '"' && t.back() == '"') ||
                             (t.front() == '\'' && t.back() == '\''))) {
        t = t.substr(1, t.size() - 2);
    }
    const auto u = t.find_first_not_of('_');
    return u == std::string::npos ? t : t.substr(u);
}

std::string without_spaces(std::string_view s) {
    std::string out;
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    return out;
}

Resolution unresolved(std::string query, std::string note) {
    Resolution r;
    r.query = std::move(query);
    r.note = std::move(note);
    return r;
}

Resolution matched(std::string query, std::string column, Tier tier, std::optional<int> distance = std::nullopt,
                   std::string note = {}) {
    Resolution r;
    r.query = std::move(query);
    r.column = std::move(column);
    r.tier = tier;
    r.distance = distance;
    r.note = std::move(note);
    return r;
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
    return out;
}

std::string number_label(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    std::string s = buf;
    std::replace(s.begin(), s.end(), '.', '_');
    std::replace(s.begin(), s.end(), '-', 'm');
    return s;
}

const Column& require_column(const DataTable& table, std::string_view name) {
    const auto r = resolve_column(name, ColumnCatalog::of(table));
    if (!r.column) fail(ErrorCode::UnresolvedTerm, "column " + std::string(name) + " not found" + (r.note.empty() ? "" : " (" + r.note + ")"));
    return table.column(*r.column);
}

}  // namespace

ColumnCatalog ColumnCatalog::of(const DataTable& table) {
    ColumnCatalog c;
    c.rows = table.rows();
    for (std::size_t i = 0; i < table.cols(); ++i) {
        c.names.push_back(table.column(i).name);
        c.kinds.push_back(table.column(i).kind);
    }
    return c;
}

ColumnCatalog ColumnCatalog::of_names(std::vector<std::string> names) {
    ColumnCatalog c;
    c.kinds.assign(names.size(), ColumnKind::Numeric);
    c.names = std::move(names);
    return c;
}

std::string_view to_string(Tier tier) noexcept {
    switch (tier) {
        case Tier::Exact: return "exact";
        case Tier::CaseInsensitive: return "case_insensitive";
        case Tier::EditDistance: return "edit_distance";
        case Tier::Prefix: return "prefix";
        case Tier::Derived: return "derived";
        case Tier::Unresolved: return "unresolved";
    }
    return "";
}

std::string TsRecipe::describe() const {
    std::string expr = base;
    for (const auto& op : ops) {
        if (op.op == 'L') expr = "shift(" + expr + ", " + std::to_string(op.k) + ")";
        else if (op.op == 'F') expr = "shift(" + expr + ", -" + std::to_string(op.k) + ")";
        else expr = "diff(" + expr + ", " + std::to_string(op.k) + ")";
    }
    return expr;
}

nlohmann::json to_json(const Resolution& r) {
    nlohmann::json j{{"term", r.query}, {"tier", std::string(to_string(r.tier))}};
    j["column"] = r.column ? nlohmann::json(*r.column) : nlohmann::json(nullptr);
    if (r.recipe) j["recipe"] = r.recipe->describe();
    if (r.distance) j["distance"] = *r.distance;
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

Resolution resolve_column(std::string_view term, const ColumnCatalog& catalog) {
    const std::string query(trim(term));
    if (query.empty()) return unresolved(query, "empty term");
    for (const auto& name : catalog.names)
        if (name == query) return matched(query, name, Tier::Exact);

    const std::string key = strip_quoting(query);
    std::vector<std::string> hits;
    for (const auto& name : catalog.names)
        if (strip_quoting(name) == key) hits.push_back(name);
    if (hits.size() == 1) return matched(query, hits[0], Tier::Exact, std::nullopt, "quoting normalized");
    if (hits.size() > 1) return unresolved(query, "ambiguous: " + join(hits));

    const std::string lkey = lower(key);
    for (const auto& name : catalog.names)
        if (lower(strip_quoting(name)) == lkey) hits.push_back(name);
    if (hits.size() == 1) return matched(query, hits[0], Tier::CaseInsensitive);
    if (hits.size() > 1) return unresolved(query, "ambiguous: " + join(hits));

    // Stata display truncation: first characters followed by ~
    if (!lkey.empty() && lkey.back() == '~') {
        const std::string stem = lkey.substr(0, lkey.size() - 1);
        for (const auto& name : catalog.names) {
            const auto ln = lower(name);
            if (ln.size() > stem.size() && ln.compare(0, stem.size(), stem) == 0) hits.push_back(name);
        }
        if (hits.size() == 1) return matched(query, hits[0], Tier::Prefix, std::nullopt, "truncated name");
        return unresolved(query, hits.empty() ? "no column with this stem" : "ambiguous: " + join(hits));
    }

    if (lkey.size() >= 4) {
        std::size_t best = 3;
        for (const auto& name : catalog.names) {
            const auto d = levenshtein(lkey, lower(strip_quoting(name)));
            if (d < best) {
                best = d;
                hits.assign(1, name);
            } else if (d == best) {
                hits.push_back(name);
            }
        }
        if (best <= 2 && hits.size() == 1) return matched(query, hits[0], Tier::EditDistance, static_cast<int>(best));
        if (best <= 2) return unresolved(query, "ambiguous at edit distance " + std::to_string(best) + ": " + join(hits));
        hits.clear();
    }

    if (lkey.size() >= 3) {
        for (const auto& name : catalog.names) {
            const auto ln = lower(strip_quoting(name));
            if (ln.size() < 3) continue;
            if (ln.compare(0, lkey.size(), lkey) == 0 || lkey.compare(0, ln.size(), ln) == 0) hits.push_back(name);
        }
        if (hits.size() == 1) return matched(query, hits[0], Tier::Prefix);
        if (hits.size() > 1) return unresolved(query, "ambiguous prefix: " + join(hits));
    }
    return unresolved(query, "no matching column");
}

std::optional<std::pair<std::vector<TsOp>, std::string>> parse_ts_term(std::string_view term) {
    static const std::regex re(R"(^((?:[LlFfDd][0-9]*)+)\.([A-Za-z_][A-Za-z0-9_]*)$)");
    const std::string t = trim(term);
    std::smatch m;
    if (!std::regex_match(t, m, re)) return std::nullopt;
    std::vector<TsOp> ops;
    const std::string prefix = m[1].str();
    for (std::size_t i = 0; i < prefix.size();) {
        TsOp op;
        op.op = static_cast<char>(std::toupper(static_cast<unsigned char>(prefix[i++])));
        std::size_t j = i;
        while (j < prefix.size() && std::isdigit(static_cast<unsigned char>(prefix[j]))) ++j;
        op.k = j > i ? std::stoi(prefix.substr(i, j - i)) : 1;
        i = j;
        ops.push_back(op);
    }
    std::reverse(ops.begin(), ops.end());
    return std::make_pair(ops, m[2].str());
}

VectorXd apply_recipe(const TsRecipe& recipe, const DataTable& table, const PanelSpec& panel) {
    const Column& time = require_column(table, panel.time);
    const Column* unit = panel.unit.empty() ? nullptr : &require_column(table, panel.unit);
    const Index n = table.rows();
    std::map<std::pair<double, double>, Index> at;
    for (Index i = 0; i < n; ++i) {
        if (time.is_missing(i) || (unit && unit->is_missing(i))) continue;
        const auto key = std::make_pair(unit ? unit->values[i] : 0.0, time.values[i]);
        if (!at.emplace(key, i).second) fail(ErrorCode::ValidationError, "repeated time values within panel");
    }
    auto shift = [&](const VectorXd& v, double by) {
        VectorXd out = VectorXd::Constant(n, kNaN);
        for (Index i = 0; i < n; ++i) {
            if (time.is_missing(i) || (unit && unit->is_missing(i))) continue;
            const auto it = at.find({unit ? unit->values[i] : 0.0, time.values[i] - by});
            if (it != at.end()) out[i] = v[it->second];
        }
        return out;
    };
    VectorXd v = require_column(table, recipe.base).values;
    for (const auto& op : recipe.ops) {
        if (op.op == 'L') v = shift(v, op.k);
        else if (op.op == 'F') v = shift(v, -op.k);
        else
            for (int r = 0; r < op.k; ++r) v = v - shift(v, 1);
    }
    return v;
}

Resolution resolve_ts_term(std::string_view term, const ColumnCatalog& catalog, const std::optional<PanelSpec>& panel,
                           const DataTable* table) {
    const std::string query = trim(term);
    const auto parsed = parse_ts_term(query);
    if (!parsed) return resolve_column(query, catalog);
    const auto& [ops, base] = *parsed;

    const std::string written = lower(query.substr(0, query.find('.')));
    std::vector<std::pair<std::string, std::string>> candidates{{query, "as written"}};
    std::vector<std::string> prefixes{written};
    if (ops.size() == 1 && written.size() == 1) prefixes.push_back(written + "1");
    for (const auto& p : prefixes) {
        candidates.emplace_back(p + base, "dot-stripped");
        candidates.emplace_back(p + "_" + base, "underscore-separated");
    }
    std::optional<Resolution> encoded;
    for (const auto& [name, how] : candidates) {
        auto r = resolve_column(name, catalog);
        if (r.tier == Tier::Exact || r.tier == Tier::CaseInsensitive) {
            r.query = query;
            r.note = how;
            encoded = r;
            break;
        }
    }

    const Resolution base_res = resolve_column(base, catalog);
    if (encoded) {
        if (!panel || !table || !base_res.column) return *encoded;
        Resolution derived = matched(query, "", Tier::Derived);
        derived.column.reset();
        derived.recipe = TsRecipe{*base_res.column, ops};
        const VectorXd computed = apply_recipe(*derived.recipe, *table, *panel);
        const Index computed_na = static_cast<Index>(computed.array().isNaN().count());
        const Index existing_na = table->column(*encoded->column).missing_count();
        if (existing_na > computed_na) {
            derived.note = "recomputed: " + *encoded->column + " has " + std::to_string(existing_na) + " missing vs " +
                           std::to_string(computed_na);
            return derived;
        }
        return *encoded;
    }
    if (!base_res.column) return unresolved(query, "base " + base + ": " + base_res.note);
    if (!panel) fail(ErrorCode::PanelRequired, query + " needs a panel or time declaration");
    Resolution r = matched(query, "", Tier::Derived);
    r.column.reset();
    r.recipe = TsRecipe{*base_res.column, ops};
    r.note = "recomputed from " + *base_res.column;
    return r;
}

std::vector<std::string> expand_factor(std::string_view term, DataTable& table) {
    std::string t = trim(term);
    static const std::regex prefix(R"(^[iI](?:b?[0-9]*)?\.)");
    std::smatch m;
    if (!std::regex_search(t, m, prefix)) fail(ErrorCode::UnresolvedTerm, t + " is not a factor term");
    const std::string raw = t.substr(static_cast<std::size_t>(m.length(0)));
    const auto catalog = ColumnCatalog::of(table);

    const std::regex dummy("^_I" + std::regex_replace(raw, std::regex(R"([.^$|()\[\]{}*+?\\])"), R"(\$&)") + "_.+$");
    std::vector<std::string> existing;
    for (const auto& name : catalog.names)
        if (std::regex_match(name, dummy)) existing.push_back(name);
    if (!existing.empty()) return existing;

    const auto res = resolve_column(raw, catalog);
    if (!res.column) fail(ErrorCode::UnresolvedTerm, "factor " + raw + ": " + res.note);
    const Column source = table.column(*res.column);
    std::set<double> levels;
    for (Index i = 0; i < source.size(); ++i)
        if (!source.is_missing(i)) levels.insert(source.values[i]);
    if (levels.size() < 2) fail(ErrorCode::DegenerateFactor, *res.column + " has fewer than two levels");

    std::vector<std::string> out;
    for (auto it = std::next(levels.begin()); it != levels.end(); ++it) {
        Column c;
        c.kind = ColumnKind::Integer;
        const std::string label = source.kind == ColumnKind::String ? source.labels[static_cast<std::size_t>(*it)] : number_label(*it);
        c.name = "_I" + *res.column + "_" + label;
        c.values.resize(source.size());
        for (Index i = 0; i < source.size(); ++i) c.values[i] = source.is_missing(i) ? kNaN : (source.values[i] == *it ? 1.0 : 0.0);
        out.push_back(c.name);
        table.add_column(std::move(c));
    }
    return out;
}

std::string materialize_expression(std::string_view expr, DataTable& table) {
    const std::string text = trim(expr);
    const auto parsed = data::parse_expression(text);
    if (data::is_bare_identifier(*parsed) || parsed->kind == data::Expr::Kind::Number) {
        fail(ErrorCode::NotAnExpression, text + " is not a computed expression");
    }
    const auto catalog = ColumnCatalog::of(table);
    std::map<std::string, std::string> names;
    for (const auto& ref : data::referenced_columns(*parsed)) {
        const auto r = resolve_column(ref, catalog);
        if (!r.column) fail(ErrorCode::UnresolvedOperand, ref + " in " + text + ": " + r.note);
        names[ref] = *r.column;
    }
    Column c;
    c.name = without_spaces(text);
    c.values = data::evaluate(
        *parsed, [&](const std::string& ref) -> const Column& { return table.column(names.at(ref)); }, table.rows());
    table.add_column(std::move(c));
    return without_spaces(text);
}

std::vector<std::string> split_cluster_spec(std::string_view s, const ColumnCatalog& catalog) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
            if (!cur.empty()) tokens.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    if (tokens.size() != 1 || tokens[0].find('.') == std::string::npos) return tokens;
    if (resolve_column(tokens[0], catalog).tier == Tier::Exact) return tokens;
    std::vector<std::string> parts;
    std::size_t start = 0;
    const std::string& t = tokens[0];
    for (std::size_t dot = t.find('.'); ; dot = t.find('.', start)) {
        parts.push_back(t.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    for (const auto& p : parts) {
        const auto tier = resolve_column(p, catalog).tier;
        if (tier != Tier::Exact && tier != Tier::CaseInsensitive) return tokens;
    }
    return parts;
}

namespace {

std::vector<std::string> split_interaction(const std::string& t) {
    std::vector<std::string> parts;
    std::string cur;
    int depth = 0;
    for (char c : t) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (depth == 0 && (c == '#' || c == ':')) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    return parts;
}

bool is_factor_term(const std::string& t) {
    static const std::regex prefix(R"(^[iI](?:b?[0-9]*)?\.)");
    return std::regex_search(t, prefix);
}

}  // namespace

std::vector<std::string> resolve_term(std::string_view term, DataTable& table, const std::optional<PanelSpec>& panel,
                                      std::vector<Resolution>& audit) {
    const std::string t = trim(term);
    if (t.empty()) fail(ErrorCode::UnresolvedTerm, "empty term");
    if (table.has(t)) {
        audit.push_back(matched(t, t, Tier::Exact));
        return {t};
    }

    if (t.find('#') != std::string::npos || (t.find(':') != std::string::npos && t.find("::") == std::string::npos)) {
        const auto parts = split_interaction(t);
        if (parts.size() > 1) {
            std::vector<std::vector<std::string>> cols;
            for (const auto& p : parts) cols.push_back(resolve_term(p, table, panel, audit));
            std::vector<std::string> combos{""};
            for (const auto& group : cols) {
                std::vector<std::string> next;
                for (const auto& prefix : combos)
                    for (const auto& c : group) next.push_back(prefix.empty() ? c : prefix + "#" + c);
                combos = next;
            }
            std::vector<std::string> out;
            for (const auto& name : combos) {
                if (!table.has(name)) {
                    Column c;
                    c.name = name;
                    c.values = VectorXd::Ones(table.rows());
                    std::size_t start = 0;
                    for (std::size_t hash = name.find('#');; hash = name.find('#', start)) {
                        const auto piece = name.substr(start, hash == std::string::npos ? std::string::npos : hash - start);
                        c.values = c.values.cwiseProduct(table.column(piece).values);
                        if (hash == std::string::npos) break;
                        start = hash + 1;
                    }
                    table.add_column(std::move(c));
                }
                Resolution r = matched(t, name, Tier::Derived, std::nullopt, "interaction");
                audit.push_back(r);
                out.push_back(name);
            }
            return out;
        }
    }

    if (is_factor_term(t)) {
        const auto before = table.cols();
        const auto cols = expand_factor(t, table);
        const Tier tier = table.cols() > before ? Tier::Derived : Tier::Exact;
        for (const auto& c : cols) audit.push_back(matched(t, c, tier, std::nullopt, tier == Tier::Derived ? "generated dummy" : "existing dummy"));
        return cols;
    }

    if (t.size() > 2 && (t[0] == 'c' || t[0] == 'C') && t[1] == '.') return resolve_term(t.substr(2), table, panel, audit);

    if (parse_ts_term(t)) {
        auto r = resolve_ts_term(t, ColumnCatalog::of(table), panel, &table);
        if (!r.resolved()) fail(ErrorCode::UnresolvedTerm, t + ": " + r.note);
        if (r.recipe) {
            Column c;
            c.name = t;
            c.values = apply_recipe(*r.recipe, table, *panel);
            table.add_column(std::move(c));
            r.column = t;
        }
        audit.push_back(r);
        return {*r.column};
    }

    if (t.find_first_of("()+-*/^") != std::string::npos) {
        try {
            const auto name = materialize_expression(t, table);
            audit.push_back(matched(t, name, Tier::Derived, std::nullopt, "computed expression"));
            return {name};
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NotAnExpression) fail(ErrorCode::UnresolvedTerm, e.what());
        }
    }

    const auto r = resolve_column(t, ColumnCatalog::of(table));
    audit.push_back(r);
    if (!r.column) fail(ErrorCode::UnresolvedTerm, t + ": " + r.note);
    return {*r.column};
}

}  // namespace ivrepro::resolve
