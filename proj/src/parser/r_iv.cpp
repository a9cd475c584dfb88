#include "ivrepro/parser/iv.hpp"

#include "ivrepro/error.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

namespace ivrepro::parser {

namespace {

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

std::string strip_spaces(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    }
    return out;
}

// Position of `name(` as a whole call (a `pkg::` qualifier is allowed).
std::size_t find_call(std::string_view text, std::string_view name, std::size_t from = 0) {
    std::size_t pos = from;
    while ((pos = text.find(name, pos)) != std::string_view::npos) {
        const bool left_ok = pos == 0 || !ident_char(text[pos - 1]) || (pos >= 2 && text.substr(pos - 2, 2) == "::");
        std::size_t after = pos + name.size();
        while (after < text.size() && text[after] == ' ') ++after;
        if (left_ok && after < text.size() && text[after] == '(') return pos;
        pos += name.size();
    }
    return std::string_view::npos;
}

std::size_t matching_paren(std::string_view text, std::size_t open) {
    int depth = 0;
    char quote = 0;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (quote) {
            if (c == '\\') ++i;
            else if (c == quote) quote = 0;
            continue;
        }
        if (c == '"' || c == '\'') quote = c;
        else if (c == '(' || c == '[' || c == '{') ++depth;
        else if (c == ')' || c == ']' || c == '}') {
            if (--depth == 0) return i;
        }
    }
    return std::string_view::npos;
}

struct Arg {
    std::string name;
    std::string value;
};

// Top-level comma split, recognising `name = value` (but not `==`).
std::vector<Arg> split_args(std::string_view inner) {
    std::vector<Arg> out;
    int depth = 0;
    char quote = 0;
    std::size_t start = 0;
    auto push = [&](std::size_t end) {
        std::string part = trim_copy(inner.substr(start, end - start));
        if (part.empty()) return;
        Arg a;
        std::size_t i = 0;
        while (i < part.size() && ident_char(part[i])) ++i;
        std::size_t j = i;
        while (j < part.size() && part[j] == ' ') ++j;
        if (i > 0 && j < part.size() && part[j] == '=' && (j + 1 >= part.size() || part[j + 1] != '=')) {
            a.name = part.substr(0, i);
            a.value = trim_copy(std::string_view(part).substr(j + 1));
        } else {
            a.value = part;
        }
        out.push_back(std::move(a));
    };
    for (std::size_t i = 0; i < inner.size(); ++i) {
        const char c = inner[i];
        if (quote) {
            if (c == '\\') ++i;
            else if (c == quote) quote = 0;
            continue;
        }
        if (c == '"' || c == '\'') quote = c;
        else if (c == '(' || c == '[' || c == '{') ++depth;
        else if (c == ')' || c == ']' || c == '}') --depth;
        else if (c == ',' && depth == 0) {
            push(i);
            start = i + 1;
        }
    }
    push(inner.size());
    return out;
}

std::optional<std::string> named_arg(const std::vector<Arg>& args, std::string_view name) {
    for (const auto& a : args) {
        if (a.name == name) return a.value;
    }
    return std::nullopt;
}

std::string unquote(std::string_view s) {
    std::string t = trim_copy(s);
    if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front()) return t.substr(1, t.size() - 2);
    return t;
}

// Splits a formula side on top-level + and -, dropping intercept markers.
struct TermList {
    std::vector<std::string> added;
    std::vector<std::string> removed;
};

TermList split_terms(std::string_view side) {
    TermList out;
    int depth = 0;
    std::string cur;
    bool negative = false;
    auto flush = [&]() {
        std::string t = strip_spaces(cur);
        cur.clear();
        if (t.empty()) return;
        (negative ? out.removed : out.added).push_back(t);
    };
    for (char c : side) {
        if (c == '(' || c == '[') ++depth;
        if (c == ')' || c == ']') --depth;
        if (depth == 0 && (c == '+' || c == '-')) {
            flush();
            negative = c == '-';
            continue;
        }
        cur.push_back(c);
    }
    flush();
    auto drop_intercept = [](std::vector<std::string>& v) {
        v.erase(std::remove_if(v.begin(), v.end(), [](const std::string& t) { return t == "1" || t == "0"; }), v.end());
    };
    drop_intercept(out.added);
    drop_intercept(out.removed);
    return out;
}

std::string normalize_r_term(const std::string& t) {
    static const std::regex factor_re(R"(^(?:as\.)?factor\(([\w.]+)\)$)");
    static const std::regex identity_re(R"(^I\((.+)\)$)");
    std::smatch m;
    if (std::regex_match(t, m, factor_re)) return "i." + m[1].str();
    if (std::regex_match(t, m, identity_re)) return m[1].str();
    return t;
}

std::vector<std::string> normalize_terms(const std::vector<std::string>& terms) {
    std::vector<std::string> out;
    for (const auto& t : expand_r_terms(terms)) {
        const std::string n = normalize_r_term(t);
        if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
    }
    return out;
}

struct Formula {
    std::string lhs;
    std::vector<std::string> parts;  // rhs split on top-level '|'
};

std::vector<std::string> split_bars(std::string_view rhs) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    int depth = 0;
    for (std::size_t i = 0; i < rhs.size(); ++i) {
        const char c = rhs[i];
        if (c == '(' || c == '[') ++depth;
        if (c == ')' || c == ']') --depth;
        if (c == '|' && depth == 0 && (i + 1 >= rhs.size() || rhs[i + 1] != '|')) {
            parts.push_back(trim_copy(rhs.substr(start, i - start)));
            start = i + 1;
        }
    }
    parts.push_back(trim_copy(rhs.substr(start)));
    return parts;
}

Formula resolve_formula(const std::string& expr, const std::map<std::string, std::string>& env, int depth);

Formula apply_update(const Formula& base, const Formula& change) {
    Formula out;
    out.lhs = strip_spaces(change.lhs) == "." ? base.lhs : change.lhs;
    const std::size_t n = std::max(base.parts.size(), change.parts.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (i >= change.parts.size()) {
            out.parts.push_back(base.parts[i]);
            continue;
        }
        const TermList edit = split_terms(change.parts[i]);
        std::vector<std::string> terms;
        for (const auto& t : edit.added) {
            if (t == ".") {
                if (i < base.parts.size()) {
                    for (const auto& b : split_terms(base.parts[i]).added) terms.push_back(b);
                }
            } else {
                terms.push_back(t);
            }
        }
        for (const auto& r : edit.removed) terms.erase(std::remove(terms.begin(), terms.end(), r), terms.end());
        std::string joined;
        for (const auto& t : terms) joined += (joined.empty() ? "" : " + ") + t;
        out.parts.push_back(joined);
    }
    return out;
}

Formula resolve_formula(const std::string& raw, const std::map<std::string, std::string>& env, int depth) {
    if (depth > 16) fail(ErrorCode::ParseFailure, "formula definitions nest too deeply");
    const std::string expr = trim_copy(raw);
    if (const auto it = env.find(expr); it != env.end()) return resolve_formula(it->second, env, depth + 1);
    if (expr.size() >= 2 && (expr.front() == '"' || expr.front() == '\'')) return resolve_formula(unquote(expr), env, depth + 1);
    for (std::string_view fn : {"as.formula", "formula", "stats::as.formula"}) {
        if (expr.rfind(std::string(fn) + "(", 0) == 0) {
            const auto args = split_args(std::string_view(expr).substr(fn.size() + 1, expr.size() - fn.size() - 2));
            if (args.empty()) break;
            return resolve_formula(args.front().value, env, depth + 1);
        }
    }
    if (expr.rfind("update(", 0) == 0 && expr.back() == ')') {
        const auto args = split_args(std::string_view(expr).substr(7, expr.size() - 8));
        if (args.size() < 2) fail(ErrorCode::ParseFailure, "update() needs a base and a change: " + expr);
        const Formula base = resolve_formula(args[0].value, env, depth + 1);
        Formula change;
        const std::string ch = args[1].value;
        const auto tilde = find_top_level(ch, '~');
        if (tilde == std::string::npos) fail(ErrorCode::ParseFailure, "update() change is not a formula: " + ch);
        change.lhs = trim_copy(std::string_view(ch).substr(0, tilde));
        change.parts = split_bars(std::string_view(ch).substr(tilde + 1));
        return apply_update(base, change);
    }
    const auto tilde = find_top_level(expr, '~');
    if (tilde == std::string::npos) fail(ErrorCode::ParseFailure, "not a formula: " + expr);
    Formula f;
    f.lhs = trim_copy(std::string_view(expr).substr(0, tilde));
    f.parts = split_bars(std::string_view(expr).substr(tilde + 1));
    return f;
}

std::vector<std::string> part_terms(const std::string& part) { return normalize_terms(split_terms(part).added); }

std::vector<std::string> variables_of(const std::string& value) {
    // ~g, ~a + b, "g", c("a", "b"), df$g
    std::string v = trim_copy(value);
    if (!v.empty() && v.front() == '~') v = v.substr(1);
    std::vector<std::string> out;
    if (v.rfind("c(", 0) == 0 && v.back() == ')') {
        for (const auto& a : split_args(std::string_view(v).substr(2, v.size() - 3))) out.push_back(unquote(a.value));
        return out;
    }
    for (auto& t : split_terms(v).added) {
        std::string u = unquote(t);
        const auto dollar = u.find('$');
        if (dollar != std::string::npos) u = u.substr(dollar + 1);
        out.push_back(u);
    }
    return out;
}

std::string lhs_name(const std::string& lhs) { return normalize_r_term(strip_spaces(lhs)); }

void finish(IVSpecification& spec, const RawIVCall& call) {
    spec.source_file = call.source_file;
    spec.line = call.first_line;
    spec.command = call.text;
    spec.table_ref = call.table_ref;
    spec.wrapped = call.wrapped;
    if (spec.cluster_vars.empty()) spec.cluster_vars = call.cluster_hint;
    // instruments never overlap the exogenous set
    std::vector<std::string> inst;
    for (const auto& z : spec.instruments) {
        if (std::find(spec.controls.begin(), spec.controls.end(), z) == spec.controls.end()) inst.push_back(z);
    }
    spec.instruments = inst;
    if (spec.outcome.empty() || spec.treatment.empty()) fail(ErrorCode::ParseFailure, "missing outcome or treatment in: " + call.text);
    if (std::find(spec.instruments.begin(), spec.instruments.end(), spec.treatment) != spec.instruments.end()) {
        fail(ErrorCode::ParseFailure, "treatment '" + spec.treatment + "' also listed as instrument");
    }
    if (spec.instruments.empty()) fail(ErrorCode::ParseFailure, "no excluded instruments in: " + call.text);
}

void subset_condition(const std::vector<Arg>& args, IVSpecification& spec) {
    if (auto s = named_arg(args, "subset")) {
        std::string cond = trim_copy(*s);
        if (!cond.empty() && cond.front() == '~') cond = trim_copy(std::string_view(cond).substr(1));
        spec.if_condition = cond;
    }
    if (auto d = named_arg(args, "data")) {
        const std::string data = trim_copy(*d);
        if (data.rfind("subset(", 0) == 0 && data.back() == ')') {
            const auto inner = split_args(std::string_view(data).substr(7, data.size() - 8));
            if (inner.size() >= 2) spec.if_condition = inner[1].value;
        } else if (const auto lb = data.find('['); lb != std::string::npos && data.back() == ']') {
            const auto inner = split_args(std::string_view(data).substr(lb + 1, data.size() - lb - 2));
            if (!inner.empty() && !inner.front().value.empty()) spec.if_condition = inner.front().value;
        }
    }
}

const std::vector<std::string> kRFunctions = {"iv_robust", "ivreg", "feols", "felm", "tsls"};

bool is_iv_formula_for(const std::string& fn, const std::string& formula_text) {
    if (fn == "feols" || fn == "felm") {
        const auto tilde = find_top_level(formula_text, '~');
        if (tilde == std::string::npos) return false;
        const auto parts = split_bars(std::string_view(formula_text).substr(tilde + 1));
        if (fn == "felm") return parts.size() >= 3 && parts[2] != "0" && parts[2].find('~') != std::string::npos;
        return parts.size() >= 2 && parts.back().find('~') != std::string::npos;
    }
    return true;
}

}  // namespace

std::vector<std::string> expand_r_terms(const std::vector<std::string>& terms) {
    std::vector<std::string> out;
    for (const auto& raw : terms) {
        const std::string t = strip_spaces(raw);
        const auto star = find_top_level(t, '*');
        if (star != std::string::npos && t.rfind("I(", 0) != 0) {
            const std::string a = t.substr(0, star);
            const std::string b = t.substr(star + 1);
            for (const auto& x : expand_r_terms({a})) out.push_back(x);
            for (const auto& x : expand_r_terms({b})) out.push_back(x);
            out.push_back(a + ":" + b);
        } else {
            out.push_back(t);
        }
    }
    return out;
}

IVSpecification parse_r_iv(const RawIVCall& call) { return parse_r_iv(call, call.formulas); }

IVSpecification parse_r_iv(const RawIVCall& call, const std::map<std::string, std::string>& env) {
    const std::string expr = call.expression.empty() ? call.text : call.expression;
    const std::string fn = call.verb;
    const auto pos = find_call(expr, fn);
    if (pos == std::string::npos) fail(ErrorCode::ParseFailure, "no " + fn + "() call in: " + expr);
    const auto open = expr.find('(', pos);
    const auto close = matching_paren(expr, open);
    if (close == std::string::npos) fail(ErrorCode::ParseFailure, "unbalanced parentheses in: " + expr);
    const auto args = split_args(std::string_view(expr).substr(open + 1, close - open - 1));
    std::string formula_text;
    if (auto f = named_arg(args, "formula")) formula_text = *f;
    else if (auto f2 = named_arg(args, "fml")) formula_text = *f2;
    else {
        for (const auto& a : args) {
            if (a.name.empty()) {
                formula_text = a.value;
                break;
            }
        }
    }
    if (formula_text.empty()) fail(ErrorCode::ParseFailure, "no formula in: " + expr);

    Formula f = resolve_formula(formula_text, env, 0);
    IVSpecification spec;
    spec.software = Language::R;
    spec.estimator = fn;
    spec.outcome = lhs_name(f.lhs);

    if (fn == "feols") {
        // y ~ x | fe | d ~ z
        const std::string& ivpart = f.parts.back();
        const auto tilde = find_top_level(ivpart, '~');
        if (tilde == std::string::npos) fail(ErrorCode::ParseFailure, "feols call without IV part: " + expr);
        const auto endog = part_terms(ivpart.substr(0, tilde));
        if (endog.size() != 1) fail(ErrorCode::ParseFailure, "expected one endogenous regressor in: " + ivpart);
        spec.treatment = endog.front();
        spec.instruments = part_terms(ivpart.substr(tilde + 1));
        spec.controls = part_terms(f.parts.front());
        if (f.parts.size() == 3) {
            for (const auto& fe : split_terms(f.parts[1]).added) spec.fixed_effects.push_back(fe);
        }
        if (auto c = named_arg(args, "cluster")) spec.cluster_vars = variables_of(*c);
        else if (auto v = named_arg(args, "vcov"); v && trim_copy(*v).front() == '~') spec.cluster_vars = variables_of(*v);
        if (auto w = named_arg(args, "weights")) spec.weight = Weight{WeightKind::Generic, variables_of(*w).front()};
    } else if (fn == "felm") {
        // y ~ x | fe | (d ~ z) | cluster
        spec.controls = part_terms(f.parts[0]);
        if (f.parts.size() > 1 && strip_spaces(f.parts[1]) != "0") {
            for (const auto& fe : split_terms(f.parts[1]).added) spec.fixed_effects.push_back(fe);
        }
        std::string ivpart = strip_spaces(f.parts[2]);
        if (ivpart.size() > 2 && ivpart.front() == '(' && ivpart.back() == ')') ivpart = ivpart.substr(1, ivpart.size() - 2);
        const auto tilde = find_top_level(ivpart, '~');
        const auto endog = part_terms(ivpart.substr(0, tilde));
        if (endog.size() != 1) fail(ErrorCode::ParseFailure, "expected one endogenous regressor in: " + ivpart);
        spec.treatment = endog.front();
        spec.instruments = part_terms(ivpart.substr(tilde + 1));
        if (f.parts.size() > 3 && strip_spaces(f.parts[3]) != "0") spec.cluster_vars = variables_of(f.parts[3]);
        if (auto w = named_arg(args, "weights")) spec.weight = Weight{WeightKind::Generic, variables_of(*w).front()};
    } else {
        if (f.parts.size() == 3) {
            spec.controls = part_terms(f.parts[0]);
            const auto endog = part_terms(f.parts[1]);
            if (endog.size() != 1) fail(ErrorCode::ParseFailure, "expected one endogenous regressor in: " + f.parts[1]);
            spec.treatment = endog.front();
            spec.instruments = part_terms(f.parts[2]);
        } else if (f.parts.size() == 2) {
            const auto rhs = part_terms(f.parts[0]);
            const auto inst = part_terms(f.parts[1]);
            std::vector<std::string> endog;
            for (const auto& t : rhs) {
                if (std::find(inst.begin(), inst.end(), t) != inst.end()) spec.controls.push_back(t);
                else endog.push_back(t);
            }
            if (endog.size() != 1) fail(ErrorCode::ParseFailure, "expected one endogenous regressor in: " + formula_text);
            spec.treatment = endog.front();
            spec.instruments = inst;
        } else {
            fail(ErrorCode::ParseFailure, "IV formula needs an instrument part: " + formula_text);
        }
        if (auto c = named_arg(args, "clusters")) spec.cluster_vars = variables_of(*c);
        if (auto fe = named_arg(args, "fixed_effects")) spec.fixed_effects = variables_of(*fe);
        if (auto w = named_arg(args, "weights")) spec.weight = Weight{WeightKind::Generic, variables_of(*w).front()};
    }
    subset_condition(args, spec);
    finish(spec, call);
    return spec;
}

namespace {

std::vector<std::string> python_columns(std::string_view value) {
    static const std::regex quoted(R"(['"]([^'"]+)['"])");
    static const std::regex attr(R"(^[A-Za-z_]\w*\.([A-Za-z_]\w*)$)");
    std::vector<std::string> out;
    const std::string v = trim_copy(value);
    if (v == "None") return out;
    std::smatch m;
    if (std::regex_match(v, m, attr)) {
        out.push_back(m[1].str());
        return out;
    }
    for (auto it = std::sregex_iterator(v.begin(), v.end(), quoted); it != std::sregex_iterator(); ++it) {
        const std::string name = (*it)[1].str();
        if (name != "const" && name != "Intercept" && name != "intercept") out.push_back(name);
    }
    return out;
}

std::string python_term(const std::string& t) {
    static const std::regex cat(R"(^C\(([\w.]+)\)$)");
    std::smatch m;
    if (std::regex_match(t, m, cat)) return "i." + m[1].str();
    return t;
}

}  // namespace

IVSpecification parse_python_iv(const RawIVCall& call) {
    const std::string expr = call.expression.empty() ? call.text : call.expression;
    IVSpecification spec;
    spec.software = Language::Python;
    spec.estimator = "IV2SLS";
    const auto pos = find_call(expr, "IV2SLS.from_formula");
    if (pos != std::string::npos) {
        const auto open = expr.find('(', pos);
        const auto close = matching_paren(expr, open);
        const auto args = split_args(std::string_view(expr).substr(open + 1, close - open - 1));
        std::string formula = named_arg(args, "formula").value_or(args.empty() ? "" : args.front().value);
        formula = unquote(formula);
        const auto tilde = formula.find('~');
        const auto lb = formula.find('[');
        const auto rb = formula.find(']');
        if (tilde == std::string::npos || lb == std::string::npos || rb == std::string::npos || lb < tilde) {
            fail(ErrorCode::ParseFailure, "formula without [endog ~ instruments] block: " + formula);
        }
        spec.outcome = strip_spaces(formula.substr(0, tilde));
        const std::string block = formula.substr(lb + 1, rb - lb - 1);
        const auto btilde = block.find('~');
        const auto endog = split_terms(block.substr(0, btilde)).added;
        if (endog.size() != 1) fail(ErrorCode::ParseFailure, "expected one endogenous regressor in: " + block);
        spec.treatment = endog.front();
        for (const auto& z : split_terms(block.substr(btilde + 1)).added) spec.instruments.push_back(python_term(z));
        const std::string rest = formula.substr(tilde + 1, lb - tilde - 1) + " " + formula.substr(rb + 1);
        for (const auto& x : split_terms(rest).added) spec.controls.push_back(python_term(x));
    } else {
        const auto p2 = find_call(expr, "IV2SLS");
        if (p2 == std::string::npos) fail(ErrorCode::ParseFailure, "no IV2SLS call in: " + expr);
        const auto open = expr.find('(', p2);
        const auto close = matching_paren(expr, open);
        const auto args = split_args(std::string_view(expr).substr(open + 1, close - open - 1));
        const char* names[] = {"dependent", "exog", "endog", "instruments"};
        std::vector<std::string> values(4);
        std::size_t positional = 0;
        for (const auto& a : args) {
            if (a.name.empty()) {
                if (positional < 4) values[positional++] = a.value;
            } else {
                for (int k = 0; k < 4; ++k) {
                    if (a.name == names[k]) values[k] = a.value;
                }
            }
        }
        const auto y = python_columns(values[0]);
        const auto d = python_columns(values[2]);
        if (y.size() != 1 || d.size() != 1) fail(ErrorCode::ParseFailure, "IV2SLS needs one dependent and one endogenous column: " + expr);
        spec.outcome = y.front();
        spec.treatment = d.front();
        spec.controls = python_columns(values[1]);
        spec.instruments = python_columns(values[3]);
    }
    static const std::regex clusters(R"(clusters\s*=\s*([^,)]+(?:\[[^\]]*\])?))");
    std::smatch m;
    if (std::regex_search(expr, m, clusters)) spec.cluster_vars = python_columns(m[1].str());
    finish(spec, call);
    return spec;
}

namespace detail {

std::vector<RawIVCall> detect_r_calls(const SourceScript& script) {
    std::vector<RawIVCall> calls;
    const auto statements = segment_statements(script.text, Language::R);
    std::map<std::string, std::string> env;
    static const std::regex assign(R"(^([A-Za-z.][\w.]*)\s*(?:<-|=)\s*(.+)$)");
    static const std::regex table_re(R"([Tt]able\s*([0-9]+[A-Za-z]?))");
    std::optional<std::string> table;
    std::size_t prev_end = 0;

    for (std::size_t si = 0; si < statements.size(); ++si) {
        const auto& st = statements[si];
        // comments since the previous statement
        const std::string between = script.text.substr(prev_end, st.begin - prev_end);
        prev_end = st.end;
        std::smatch tm;
        for (auto it = std::sregex_iterator(between.begin(), between.end(), table_re); it != std::sregex_iterator(); ++it) {
            if (between.find('#') != std::string::npos) table = "Table " + (*it)[1].str();
        }

        std::smatch m;
        std::string model_name;
        if (std::regex_match(st.text, m, assign)) {
            const std::string rhs = trim_copy(m[2].str());
            model_name = m[1].str();
            const bool formula = rhs.rfind("update(", 0) == 0 || rhs.rfind("as.formula(", 0) == 0 ||
                                 rhs.rfind("formula(", 0) == 0 ||
                                 (find_top_level(rhs, '~') != std::string::npos && rhs.find('(') != 0 &&
                                  find_call(rhs, "ivreg") == std::string::npos && find_call(rhs, "feols") == std::string::npos &&
                                  find_call(rhs, "iv_robust") == std::string::npos && find_call(rhs, "felm") == std::string::npos &&
                                  find_call(rhs, "lm") == std::string::npos);
            if (formula) {
                env[model_name] = rhs;
                continue;
            }
        }
        for (const auto& fn : kRFunctions) {
            const auto pos = find_call(st.text, fn);
            if (pos == std::string::npos) continue;
            const auto open = st.text.find('(', pos);
            const auto close = matching_paren(st.text, open);
            if (close == std::string::npos) continue;
            RawIVCall call;
            call.source_file = script.path;
            call.language = Language::R;
            call.verb = fn;
            call.text = st.text;
            call.expression = st.text.substr(pos, close + 1 - pos);
            call.begin = st.begin;
            call.end = st.end;
            call.first_line = st.first_line;
            call.last_line = st.last_line;
            call.formulas = env;
            call.table_ref = table;
            const auto args = split_args(std::string_view(st.text).substr(open + 1, close - open - 1));
            std::string formula_text;
            for (const auto& a : args) {
                if (a.name.empty() || a.name == "formula" || a.name == "fml") {
                    formula_text = a.value;
                    break;
                }
            }
            try {
                const Formula f = resolve_formula(formula_text, env, 0);
                std::string rebuilt = f.lhs + " ~ ";
                for (std::size_t k = 0; k < f.parts.size(); ++k) rebuilt += (k ? " | " : "") + f.parts[k];
                if (!is_iv_formula_for(fn, rebuilt)) continue;
                if (fn == "ivreg" || fn == "iv_robust" || fn == "tsls") {
                    if (f.parts.size() < 2) continue;
                }
            } catch (const Error&) {
                // undecodable formula: still an IV call, parse will report it
            }
            call.wrapped = find_call(st.text, "boot") != std::string::npos || find_call(st.text, "lapply") != std::string::npos;
            // later vcovCL(model, cluster = ~g) / coeftest(model, vcov = vcovCL, cluster = ~g)
            if (!model_name.empty()) {
                const std::regex hint("(?:vcovCL|cluster\\.vcov|coeftest)\\(\\s*" + std::regex_replace(model_name, std::regex(R"(\.)"), R"(\.)") +
                                      R"(\b[^)]*cluster\s*=\s*~?\s*([\w.]+))");
                for (std::size_t sj = si + 1; sj < statements.size(); ++sj) {
                    std::smatch hm;
                    if (std::regex_search(statements[sj].text, hm, hint)) {
                        call.cluster_hint = {hm[1].str()};
                        break;
                    }
                }
            }
            calls.push_back(std::move(call));
            break;
        }
    }
    return calls;
}

std::vector<RawIVCall> detect_python_calls(const SourceScript& script) {
    std::vector<RawIVCall> calls;
    const auto statements = segment_statements(script.text, Language::Python);
    for (const auto& st : statements) {
        auto pos = find_call(st.text, "IV2SLS.from_formula");
        if (pos == std::string::npos) pos = find_call(st.text, "IV2SLS");
        if (pos == std::string::npos) continue;
        if (st.text.rfind("from ", 0) == 0 || st.text.rfind("import ", 0) == 0) continue;
        RawIVCall call;
        call.source_file = script.path;
        call.language = Language::Python;
        call.verb = "IV2SLS";
        call.text = st.text;
        call.expression = st.text.substr(pos);
        call.begin = st.begin;
        call.end = st.end;
        call.first_line = st.first_line;
        call.last_line = st.last_line;
        calls.push_back(std::move(call));
    }
    return calls;
}

}  // namespace detail

}  // namespace ivrepro::parser
