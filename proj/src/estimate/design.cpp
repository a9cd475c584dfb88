#include "ivrepro/estimate/design.hpp"

#include "ivrepro/data/expression.hpp"
#include "ivrepro/error.hpp"

#include <cmath>

namespace ivrepro::estimate {

using data::Column;
using data::DataTable;
using Eigen::Index;
using Eigen::VectorXd;

namespace {

std::string single(const std::vector<std::string>& cols, const std::string& term) {
    if (cols.size() != 1) fail(ErrorCode::UnresolvedTerm, term + " expands to " + std::to_string(cols.size()) + " columns");
    return cols.front();
}

bool is_esample_only(const std::string& cond) {
    std::string s;
    for (char c : cond)
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
    return s == "e(sample)" || s == "e(sample)==1";
}

// several grouping variables combine into one id, as with a#b absorb terms
Grouping grouping_of(const DataTable& table, const std::string& name, const std::vector<std::string>& cols,
                     const std::vector<Index>& rows) {
    std::vector<std::string> labels;
    labels.reserve(rows.size());
    for (Index r : rows) {
        std::string key;
        for (std::size_t c = 0; c < cols.size(); ++c) key += (c ? "#" : "") + table.column(cols[c]).label(r);
        labels.push_back(std::move(key));
    }
    return make_grouping(name, labels);
}

}  // namespace

DesignBuild build_design(DataTable table, const parser::IVSpecification& spec) {
    DesignBuild out;
    out.rows_in = table.rows();
    auto& audit = out.audit;

    std::optional<resolve::PanelSpec> panel;
    if (spec.panel) {
        const auto cat = resolve::ColumnCatalog::of(table);
        resolve::PanelSpec p;
        if (!spec.panel->unit.empty()) {
            const auto u = resolve::resolve_column(spec.panel->unit, cat);
            if (!u.column) fail(ErrorCode::UnresolvedTerm, "panel unit " + spec.panel->unit);
            p.unit = *u.column;
        }
        const auto t = resolve::resolve_column(spec.panel->time, cat);
        if (t.column) p.time = *t.column;
        if (!p.time.empty()) panel = p;
    }

    auto terms = [&](const std::vector<std::string>& list) {
        std::vector<std::string> cols;
        for (const auto& term : list)
            for (auto& c : resolve::resolve_term(term, table, panel, audit)) cols.push_back(std::move(c));
        return cols;
    };
    const std::string y = single(resolve::resolve_term(spec.outcome, table, panel, audit), spec.outcome);
    const std::string d = single(resolve::resolve_term(spec.treatment, table, panel, audit), spec.treatment);
    const auto z = terms(spec.instruments);
    const auto x = terms(spec.controls);
    if (z.empty()) fail(ErrorCode::UnresolvedTerm, "no instruments");

    // absorbed effects: each entry may be an interaction of several variables
    std::vector<std::vector<std::string>> fe;
    auto add_fe = [&](const std::string& term) {
        std::vector<std::string> parts;
        std::string cur;
        for (char c : term + "#") {
            if (c == '#') {
                std::string p = cur;
                if (p.size() > 2 && (p[0] == 'i' || p[0] == 'I') && p[1] == '.') p = p.substr(2);
                if (!p.empty()) parts.push_back(single(resolve::resolve_term(p, table, panel, audit), p));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!parts.empty() && std::find(fe.begin(), fe.end(), parts) == fe.end()) fe.push_back(parts);
    };
    for (const auto& f : spec.fixed_effects) add_fe(f);
    if (spec.panel_fe && panel && !panel->unit.empty()) add_fe(panel->unit);

    std::vector<std::string> clusters;
    for (const auto& c : spec.cluster_vars)
        for (const auto& part : resolve::split_cluster_spec(c, resolve::ColumnCatalog::of(table)))
            clusters.push_back(single(resolve::resolve_term(part, table, panel, audit), part));

    std::optional<std::string> weight;
    if (spec.weight) weight = single(resolve::resolve_term(spec.weight->var, table, panel, audit), spec.weight->var);

    const Index n0 = table.rows();
    std::vector<bool> keep(static_cast<std::size_t>(n0), true);
    const Column* flag = table.find(kEsampleColumn);
    if (flag) {
        for (Index i = 0; i < n0; ++i) {
            if (flag->is_missing(i) || flag->values[i] == 0) {
                keep[static_cast<std::size_t>(i)] = false;
                ++out.rows_flagged_out;
            }
        }
    }

    if (spec.if_condition && !spec.if_condition->empty() && !(flag && is_esample_only(*spec.if_condition))) {
        const auto expr = data::parse_expression(*spec.if_condition);
        const auto cat = resolve::ColumnCatalog::of(table);
        const auto lookup = [&](const std::string& ref) -> const Column& {
            if (ref == "e(sample)") {
                if (!flag) fail(ErrorCode::UnresolvedTerm, "e(sample) used without an exported esample flag");
                return *flag;
            }
            const auto r = resolve::resolve_column(ref, cat);
            if (!r.column) fail(ErrorCode::UnresolvedTerm, "condition term " + ref + ": " + r.note);
            return table.column(*r.column);
        };
        const auto dialect = spec.software == parser::Language::R ? data::Dialect::R : data::Dialect::Stata;
        const VectorXd mask = data::evaluate(*expr, lookup, n0, dialect);
        for (Index i = 0; i < n0; ++i) {
            if (!keep[static_cast<std::size_t>(i)]) continue;
            if (std::isnan(mask[i]) || mask[i] == 0) {
                keep[static_cast<std::size_t>(i)] = false;
                ++out.rows_condition_out;
            }
        }
    }

    std::vector<std::string> required{y, d};
    required.insert(required.end(), z.begin(), z.end());
    required.insert(required.end(), x.begin(), x.end());
    for (const auto& f : fe) required.insert(required.end(), f.begin(), f.end());
    if (!clusters.empty()) required.push_back(clusters.front());
    if (weight) required.push_back(*weight);
    std::vector<Index> rows;
    for (Index i = 0; i < n0; ++i) {
        if (!keep[static_cast<std::size_t>(i)]) continue;
        bool ok = true;
        for (const auto& c : required) {
            const Column& col = table.column(c);
            if (col.is_missing(i) || (col.kind == data::ColumnKind::String && col.labels[static_cast<std::size_t>(col.values[i])].empty())) {
                ok = false;
                break;
            }
        }
        if (ok && weight && !(table.column(*weight).values[i] > 0)) ok = false;
        if (ok) rows.push_back(i);
        else ++out.rows_missing_out;
    }
    if (rows.empty()) fail(ErrorCode::EmptySample, "no complete observations");

    auto& b = out.bundle;
    const Index n = static_cast<Index>(rows.size());
    auto gather = [&](const std::string& c) {
        VectorXd v(n);
        const auto& src = table.column(c).values;
        for (Index i = 0; i < n; ++i) v[i] = src[rows[static_cast<std::size_t>(i)]];
        return v;
    };
    b.y = gather(y);
    b.d = gather(d);
    b.Z.resize(n, static_cast<Index>(z.size()));
    for (std::size_t j = 0; j < z.size(); ++j) b.Z.col(static_cast<Index>(j)) = gather(z[j]);
    b.X.resize(n, static_cast<Index>(x.size()) + 1);
    b.X.col(0).setOnes();
    for (std::size_t j = 0; j < x.size(); ++j) b.X.col(static_cast<Index>(j) + 1) = gather(x[j]);
    b.y_name = y;
    b.d_name = d;
    b.z_names = z;
    b.x_names.push_back("_cons");
    b.x_names.insert(b.x_names.end(), x.begin(), x.end());
    if (weight) {
        b.weights = gather(*weight);
        if (spec.weight->kind == parser::WeightKind::FWeight) {
            b.notes.push_back("fweight treated as a sampling weight; standard errors are not frequency-expanded");
        }
    }
    if (!clusters.empty()) {
        b.clusters.push_back(grouping_of(table, clusters.front(), {clusters.front()}, rows));
        for (std::size_t c = 1; c < clusters.size(); ++c) b.notes.push_back("additional cluster variable " + clusters[c] + " ignored for inference");
    }
    for (const auto& f : fe) {
        std::string name;
        for (const auto& p : f) name += (name.empty() ? "" : "#") + p;
        b.fixed_effects.push_back(grouping_of(table, name, f, rows));
    }
    b.source_rows = rows;
    return out;
}

}  // namespace ivrepro::estimate
