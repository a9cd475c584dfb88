#include "ivrepro/report/report.hpp"

#include "ivrepro/error.hpp"
#include "ivrepro/version.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace ivrepro::report {

using diagnostics::WarningFlag;
using nlohmann::json;

std::string fixed(double v, int decimals) {
    if (std::isnan(v)) return "n/a";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string s = buf;
    // "-0.000" reads as a sign claim the data does not make
    if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

namespace {

std::string coef(double v) { return fixed(v, 3); }
std::string fstat(double v) { return fixed(v, 1); }
std::string opt_f(const std::optional<double>& v) { return v ? fstat(*v) : "n/a"; }

std::string interval(double lo, double hi) { return "[" + coef(lo) + ", " + coef(hi) + "]"; }

std::string md_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '|' || c == '*' || c == '_' || c == '`' || c == '[' || c == ']') out += '\\';
        if (c == '\n') {
            out += ' ';
            continue;
        }
        out += c;
    }
    return out;
}

std::string code(std::string_view s) {
    if (s.empty()) return "none";
    std::string out = "`";
    for (char c : s) out += c == '\n' ? ' ' : c;
    return out + "`";
}

std::string term_list(const json& spec, const char* key) {
    if (!spec.contains(key) || !spec[key].is_array() || spec[key].empty()) return "none";
    std::string out;
    for (const auto& t : spec[key]) {
        if (!out.empty()) out += ", ";
        out += code(t.get<std::string>());
    }
    return out;
}

std::string str_field(const json& spec, const char* key) {
    if (!spec.contains(key) || !spec[key].is_string()) return "";
    return spec[key].get<std::string>();
}

std::string warning_text(WarningFlag f, const DiagnosticsBundle& b) {
    switch (f) {
        case WarningFlag::WeakInstrument:
            return "Weak instrument: effective F " + opt_f(b.effective_F) + " is below 10.";
        case WarningFlag::ARInsignificant:
            return "Anderson-Rubin test does not reject zero (p = " + (b.ar ? fixed(b.ar->p_value, 3) : "n/a") + ").";
        case WarningFlag::JackknifeSensitive:
            return "Dropping " + md_escape(b.jackknife ? b.jackknife->most_influential : "") +
                   " shifts the estimate by a relative " + (b.jackknife ? fixed(b.jackknife->relative_shift, 3) : "n/a") +
                   ", above 0.20.";
        case WarningFlag::BootCIncludesZero:
            return "Bootstrap-c interval includes zero.";
        case WarningFlag::SignDisagreement:
            return "2SLS and OLS estimates are both significant at 5% with opposite signs.";
    }
    return "";
}

std::string ar_interval_text(const DiagnosticsBundle& b) {
    if (!b.ar_ci) return "n/a";
    const auto& a = *b.ar_ci;
    if (!a.low || !a.high) return "empty";
    std::string lo = a.open_low ? "(-inf" : "[" + coef(*a.low);
    std::string hi = a.open_high ? "inf)" : coef(*a.high) + "]";
    std::string s = lo + ", " + hi;
    if (a.disjoint) s += " (not contiguous on the grid)";
    return s;
}

void design_section(std::ostringstream& o, const DiagnosticsBundle& b) {
    const auto& s = b.spec;
    o << "### Design\n\n";
    o << "- Source: " << code(str_field(s, "source_file") + ":" + std::to_string(s.value("line", 0))) << "\n";
    o << "- Software: " << md_escape(str_field(s, "software")) << "\n";
    o << "- Estimator: " << code(str_field(s, "estimator")) << "\n";
    if (s.contains("table_ref") && s["table_ref"].is_string()) o << "- Reported in: " << md_escape(s["table_ref"].get<std::string>()) << "\n";
    o << "- Command: " << code(str_field(s, "command")) << "\n";
    o << "- Sample condition: " << (s.contains("if_condition") && s["if_condition"].is_string() ? code(s["if_condition"].get<std::string>()) : "none") << "\n";
    o << "- Observations: " << b.tsls.n << "\n";
    if (b.tsls.G > 0) {
        o << "- Clusters: " << b.tsls.G << " (" << term_list(s, "cluster_vars") << ")\n";
    } else {
        o << "- Clusters: none, heteroskedasticity-robust errors\n";
    }
    o << "\n";
}

void variables_section(std::ostringstream& o, const DiagnosticsBundle& b) {
    const auto& s = b.spec;
    o << "### Variables\n\n";
    o << "| Role | Terms |\n|---|---|\n";
    o << "| Outcome (Y) | " << code(str_field(s, "outcome")) << " |\n";
    o << "| Treatment (D) | " << code(str_field(s, "treatment")) << " |\n";
    o << "| Instruments (Z) | " << term_list(s, "instruments") << " |\n";
    o << "| Controls (X) | " << term_list(s, "controls") << " |\n";
    o << "| Fixed effects | " << term_list(s, "fixed_effects") << " |\n";
    std::string w = "none";
    if (s.contains("weight") && s["weight"].is_object()) w = code(s["weight"].value("var", "")) + " (" + s["weight"].value("kind", "") + ")";
    o << "| Weights | " << w << " |\n\n";
    if (b.resolution.is_array() && !b.resolution.empty()) {
        o << "Column resolution:\n\n| Term | Column | Match |\n|---|---|---|\n";
        for (const auto& r : b.resolution) {
            std::string col = r.contains("column") && r["column"].is_string() ? code(r["column"].get<std::string>()) : "unresolved";
            std::string how = r.value("tier", "");
            if (r.contains("recipe")) how += ", " + code(r["recipe"].get<std::string>());
            o << "| " << code(r.value("term", "")) << " | " << col << " | " << md_escape(how) << " |\n";
        }
        o << "\n";
    }
}

void estimates_section(std::ostringstream& o, const DiagnosticsBundle& b) {
    o << "### Estimates\n\n";
    o << "| Estimator | Coefficient | SE | t | p | 95% CI |\n|---|---|---|---|---|---|\n";
    auto row = [&](const char* name, const estimate::EstimateResult& e) {
        o << "| " << name << " | " << coef(e.coefficient) << " | " << coef(e.std_error) << " | " << fixed(e.t_stat, 3) << " | "
          << fixed(e.p_value, 3) << " | " << interval(e.ci_low, e.ci_high) << " |\n";
    };
    row("OLS", b.ols);
    row("2SLS", b.tsls);
    o << "\n";
    if (b.reference && b.reference->is_object()) {
        const auto& r = *b.reference;
        const double ref = r.value("coefficient", std::nan(""));
        o << "Reported estimate: " << coef(ref);
        if (r.contains("pass") && r["pass"].is_boolean()) o << " (" << (r["pass"].get<bool>() ? "reproduced" : "not reproduced") << ")";
        o << "\n\n";
    }
}

void diagnostics_section(std::ostringstream& o, const DiagnosticsBundle& b) {
    o << "### Diagnostics\n\n| Statistic | Value |\n|---|---|\n";
    o << "| First-stage F (conventional) | " << fstat(b.conventional_F) << " |\n";
    o << "| Effective F | " << opt_f(b.effective_F) << " |\n";
    o << "| Bootstrap F | " << opt_f(b.bootstrap_F) << " |\n";
    if (b.ar) {
        o << "| Anderson-Rubin statistic | " << fixed(b.ar->statistic, 3) << " |\n";
        o << "| Anderson-Rubin p-value | " << fixed(b.ar->p_value, 3) << " |\n";
    } else {
        o << "| Anderson-Rubin | n/a |\n";
    }
    o << "| Anderson-Rubin 95% CI | " << ar_interval_text(b) << " |\n";
    if (b.tf.applicable && b.tf.adjusted_critical) {
        const auto ci = diagnostics::tf_interval(b);
        o << "| tF critical value | " << coef(*b.tf.adjusted_critical) << " |\n";
        o << "| tF 95% CI | " << interval(ci->low, ci->high) << " |\n";
        o << "| tF test at 5% | " << (b.tf.pass_at_5pct ? "rejects zero" : "does not reject zero") << " |\n";
    } else if (b.tf.below_floor) {
        o << "| tF test at 5% | first-stage F at or below 3.84, interval unbounded |\n";
    } else {
        o << "| tF test at 5% | not applicable |\n";
    }
    if (b.bootstrap) {
        o << "| Bootstrap-c 95% CI | " << interval(b.bootstrap->boot_c.low, b.bootstrap->boot_c.high) << " |\n";
        o << "| Bootstrap-t 95% CI | " << interval(b.bootstrap->boot_t.low, b.bootstrap->boot_t.high) << " |\n";
        o << "| Bootstrap replicates | " << b.bootstrap->iters << " (" << b.bootstrap->unit << " resampling, seed " << b.bootstrap->seed
          << ") |\n";
    } else {
        o << "| Bootstrap | n/a |\n";
    }
    if (b.jackknife) {
        const auto& jk = *b.jackknife;
        o << "| Jackknife range | " << interval(jk.min, jk.max) << " |\n";
        o << "| Most influential " << jk.unit << " | " << md_escape(jk.most_influential) << " |\n";
        o << "| Jackknife relative shift | " << fixed(jk.relative_shift, 3) << " |\n";
    } else {
        o << "| Jackknife | n/a |\n";
    }
    o << "| rho(D, D-hat) | " << (b.rho ? fixed(*b.rho, 3) : "n/a") << " |\n";
    o << "| abs(2SLS / OLS) | " << (b.ratio ? fixed(*b.ratio, 3) : "n/a") << " |\n\n";
}

}  // namespace

std::string render_report(const std::vector<DiagnosticsBundle>& bundles, const acquire::StudyInfo& study) {
    if (bundles.empty()) fail(ErrorCode::NoSpecs, "no diagnostics to report");
    std::ostringstream o;
    o << "# IV Reproduction Report: " << md_escape(study.title.empty() ? "untitled study" : study.title) << "\n\n";
    o << "- Authors: " << md_escape(study.authors.empty() ? "unknown" : study.authors) << "\n";
    o << "- Year: " << (study.year.empty() ? "unknown" : study.year) << "\n";
    o << "- Journal: " << md_escape(study.journal.empty() ? "unknown" : study.journal) << "\n";
    o << "- Replication package: " << (study.replication_url.empty() ? "supplied manually" : study.replication_url) << "\n";
    o << "- Pipeline version: " << kPipelineVersion << "\n\n";

    o << "## Executive Summary\n\n";
    o << "| Spec | Outcome | Treatment | 2SLS | Effective F | Warnings | Rating |\n|---|---|---|---|---|---|---|\n";
    for (const auto& b : bundles) {
        o << "| " << b.spec_index << " | " << code(str_field(b.spec, "outcome")) << " | " << code(str_field(b.spec, "treatment")) << " | "
          << coef(b.tsls.coefficient) << " | " << opt_f(b.effective_F) << " | " << b.warnings.size() << " | "
          << diagnostics::to_string(b.rating) << " |\n";
    }
    o << "\nRating rule: 0 warnings HIGH, 1-2 MODERATE, 3-4 LOW, 5 or more VERY_LOW.\n\n";

    for (const auto& b : bundles) {
        o << "## Specification " << b.spec_index << "\n\n";
        design_section(o, b);
        variables_section(o, b);
        estimates_section(o, b);
        diagnostics_section(o, b);

        o << "### Figures\n\n";
        for (auto kind : kFigureKinds) {
            const auto stem = figure_stem(b.spec_index, kind);
            o << "- ![" << to_string(kind) << "](figures/" << stem << ".svg) ([data](figures/" << stem << ".csv))\n";
        }
        o << "\n### Flags\n\n";
        o << "Rating: **" << diagnostics::to_string(b.rating) << "** (" << b.warnings.size() << " warning"
          << (b.warnings.size() == 1 ? "" : "s") << ")\n\n";
        for (auto f : b.warnings) o << "- " << diagnostics::to_string(f) << ": " << warning_text(f, b) << "\n";
        if (b.nonlinear) o << "- Non-Linear Model Approximation: the original model is nonlinear; estimates use linear 2SLS.\n";
        if (!b.incomplete.empty()) {
            o << "- Incomplete: ";
            for (std::size_t i = 0; i < b.incomplete.size(); ++i) o << (i ? ", " : "") << b.incomplete[i];
            o << " could not be computed\n";
        }
        if (b.capped) o << "- Resampling diagnostics used a capped sample of " << b.cap_n << " rows out of " << b.cap_original_n << ".\n";
        for (const auto& n : b.notes) o << "- Note: " << md_escape(n) << "\n";
        if (b.warnings.empty() && !b.nonlinear && b.incomplete.empty() && !b.capped && b.notes.empty()) o << "- None\n";
        o << "\n";
    }
    return o.str();
}

}  // namespace ivrepro::report
