#include "ivrepro/parser/iv.hpp"

#include "ivrepro/error.hpp"

#include <algorithm>
#include <regex>
#include <set>

namespace ivrepro::parser {

namespace {

const std::set<std::string> kStataIvVerbs = {"ivreg2", "ivreg", "ivregress", "xtivreg", "xtivreg2",
                                            "ivreghdfe", "reghdfe", "ivprobit", "ivtobit", "ivreg29", "ivreg210"};

bool has_parenthetical_iv(std::string_view body) {
    std::size_t pos = 0;
    while ((pos = body.find('(', pos)) != std::string_view::npos) {
        int depth = 0;
        std::size_t j = pos;
        for (; j < body.size(); ++j) {
            if (body[j] == '(') ++depth;
            if (body[j] == ')' && --depth == 0) break;
        }
        const auto inner = body.substr(pos + 1, j - pos - 1);
        if (find_top_level(inner, '=') != std::string::npos) return true;
        pos = j;
    }
    return false;
}

std::string second_word(std::string_view body) {
    const auto words = split_top_level(body);
    return words.size() > 1 ? to_lower(words[1]) : std::string();
}

bool is_iv_statement(const std::string& verb, std::string_view body) {
    if (!kStataIvVerbs.count(verb)) return false;
    if (verb == "ivregress") {
        const auto est = second_word(body);
        return est == "2sls" || est == "liml" || est == "gmm";
    }
    if (verb == "reghdfe" || verb == "ivreghdfe") return has_parenthetical_iv(body);
    return true;
}

std::optional<std::string> table_reference(std::string_view comment) {
    static const std::regex re(R"(\b[Tt][Aa][Bb][Ll][Ee]\s*([0-9]+[A-Za-z]?|[IVX]+\b|[A-Z][0-9]+))");
    std::match_results<std::string_view::const_iterator> m;
    std::optional<std::string> last;
    auto it = comment.begin();
    while (std::regex_search(it, comment.end(), m, re)) {
        last = "Table " + m[1].str();
        it = m[0].second;
    }
    return last;
}

// Quoted first argument of parmby/statsby style commands.
std::optional<std::string> quoted_command(std::string_view body) {
    const auto open = body.find('"');
    if (open == std::string_view::npos) return std::nullopt;
    const auto close = body.find('"', open + 1);
    if (close == std::string_view::npos) return std::nullopt;
    return std::string(body.substr(open + 1, close - open - 1));
}

struct StataParts {
    std::string verb;
    std::vector<std::string> prefixes;
    std::vector<std::string> varlist;  // tokens before the first comma, iv group kept intact
    std::string iv_group;
    std::optional<Weight> weight;
    std::optional<std::string> if_condition;
    std::vector<std::pair<std::string, std::string>> options;
};

std::vector<std::pair<std::string, std::string>> parse_options(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& tok : split_top_level(text)) {
        const auto paren = tok.find('(');
        if (paren != std::string::npos && tok.back() == ')') {
            out.emplace_back(to_lower(tok.substr(0, paren)), trim_copy(std::string_view(tok).substr(paren + 1, tok.size() - paren - 2)));
        } else {
            out.emplace_back(to_lower(tok), std::string());
        }
    }
    return out;
}

std::optional<Weight> parse_weight(std::string_view w) {
    const auto eq = w.find('=');
    if (eq == std::string_view::npos) return std::nullopt;
    const std::string kind = to_lower(trim_copy(w.substr(0, eq)));
    Weight out;
    out.var = trim_copy(w.substr(eq + 1));
    if (kind.rfind("aw", 0) == 0) out.kind = WeightKind::AWeight;
    else if (kind.rfind("pw", 0) == 0) out.kind = WeightKind::PWeight;
    else if (kind.rfind("fw", 0) == 0 || kind == "frequency") out.kind = WeightKind::FWeight;
    else out.kind = WeightKind::Generic;
    return out;
}

// Finds the keyword as a whole word at top level.
std::size_t find_keyword(std::string_view s, std::string_view kw) {
    int depth = 0;
    bool in_str = false;
    for (std::size_t i = 0; i + kw.size() <= s.size(); ++i) {
        const char c = s[i];
        if (in_str) {
            if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') in_str = true;
        else if (c == '(' || c == '[') ++depth;
        else if (c == ')' || c == ']') --depth;
        if (depth != 0) continue;
        if (s.substr(i, kw.size()) == kw && (i == 0 || s[i - 1] == ' ') &&
            (i + kw.size() == s.size() || s[i + kw.size()] == ' ')) {
            return i;
        }
    }
    return std::string_view::npos;
}

StataParts split_stata(const std::string& statement) {
    StataParts p;
    std::string body;
    split_prefixes(statement, p.prefixes, body);
    const auto comma = find_top_level(body, ',');
    std::string main = trim_copy(std::string_view(body).substr(0, comma));
    if (comma != std::string::npos) p.options = parse_options(std::string_view(body).substr(comma + 1));

    if (const auto lb = find_top_level(main, '['); lb != std::string::npos) {
        const auto rb = main.find(']', lb);
        if (rb != std::string::npos) {
            p.weight = parse_weight(std::string_view(main).substr(lb + 1, rb - lb - 1));
            main = trim_copy(main.substr(0, lb) + " " + main.substr(rb + 1));
        }
    }
    if (const auto in_pos = find_keyword(main, "in"); in_pos != std::string::npos && find_keyword(main, "if") == std::string::npos) {
        main = trim_copy(std::string_view(main).substr(0, in_pos));
    }
    if (const auto if_pos = find_keyword(main, "if"); if_pos != std::string::npos) {
        std::string cond = trim_copy(std::string_view(main).substr(if_pos + 2));
        if (const auto in_pos = find_keyword(cond, "in"); in_pos != std::string::npos) cond = trim_copy(std::string_view(cond).substr(0, in_pos));
        p.if_condition = cond;
        main = trim_copy(std::string_view(main).substr(0, if_pos));
    }
    auto tokens = split_top_level(main);
    if (tokens.empty()) fail(ErrorCode::ParseFailure, "empty statement");
    p.verb = canonical_verb(tokens.front());
    tokens.erase(tokens.begin());
    if (p.verb == "ivregress" && !tokens.empty()) tokens.erase(tokens.begin());
    for (auto& t : tokens) {
        if (t.front() == '(' && t.back() == ')' && find_top_level(std::string_view(t).substr(1, t.size() - 2), '=') != std::string::npos) {
            if (!p.iv_group.empty()) fail(ErrorCode::ParseFailure, "more than one instrumented group: " + t);
            p.iv_group = t.substr(1, t.size() - 2);
        } else {
            p.varlist.push_back(t);
        }
    }
    return p;
}

// L(1/4).x -> L1.x ... L4.x ; l.(a b) -> l.a l.b ; a##b -> a b a#b
std::vector<std::string> expand_varlist(const std::vector<std::string>& tokens) {
    static const std::regex range_op(R"(^([LlFfDdSs])\((\d+)/(\d+)\)\.(.+)$)");
    std::vector<std::string> out;
    for (const auto& tok : tokens) {
        std::smatch m;
        if (std::regex_match(tok, m, range_op)) {
            const int lo = std::stoi(m[2].str());
            const int hi = std::stoi(m[3].str());
            for (int k = lo; k <= hi; ++k) {
                out.push_back(k == 0 ? m[4].str() : m[1].str() + std::to_string(k) + "." + m[4].str());
            }
            continue;
        }
        const auto dot_paren = tok.find(".(");
        if (dot_paren != std::string::npos && tok.back() == ')') {
            const std::string op = tok.substr(0, dot_paren + 1);
            for (const auto& inner : split_top_level(std::string_view(tok).substr(dot_paren + 2, tok.size() - dot_paren - 3))) {
                out.push_back(op + inner);
            }
            continue;
        }
        const auto ff = tok.find("##");
        if (ff != std::string::npos) {
            const std::string a = tok.substr(0, ff);
            const std::string b = tok.substr(ff + 2);
            out.push_back(a);
            out.push_back(b);
            out.push_back(a + "#" + b);
            continue;
        }
        out.push_back(tok);
    }
    return out;
}

std::vector<std::string> option_words(const std::string& args) {
    std::vector<std::string> out;
    for (auto& w : split_top_level(args)) out.push_back(w);
    return out;
}

void apply_stata_options(const StataParts& p, IVSpecification& spec) {
    for (const auto& [name, args] : p.options) {
        if (name.rfind("cl", 0) == 0 && std::string("cluster").rfind(name, 0) == 0) {
            spec.cluster_vars = option_words(args);
        } else if (name == "vce") {
            auto words = option_words(args);
            if (!words.empty() && to_lower(words.front()).rfind("cl", 0) == 0) {
                words.erase(words.begin());
                spec.cluster_vars = words;
            }
        } else if (name == "absorb" || name == "a") {
            for (auto w : option_words(args)) {
                // absorb(fe, savefe) style suboptions and named saves fe_id=var
                if (w.back() == ',') w.pop_back();
                const auto eq = w.find('=');
                if (eq != std::string::npos) w = w.substr(eq + 1);
                if (w.rfind("i.", 0) == 0) w = w.substr(2);
                if (!w.empty()) spec.fixed_effects.push_back(w);
            }
        } else if (name == "fe") {
            spec.panel_fe = true;
        }
    }
}

std::vector<std::string> subtract(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::string> out;
    for (const auto& x : a) {
        const bool in_b = std::any_of(b.begin(), b.end(), [&](const std::string& y) { return normalize_term(x) == normalize_term(y); });
        if (!in_b) out.push_back(x);
    }
    return out;
}

void validate(IVSpecification& spec) {
    if (spec.outcome.empty() || spec.treatment.empty()) fail(ErrorCode::ParseFailure, "missing outcome or treatment in: " + spec.command);
    spec.instruments = subtract(spec.instruments, spec.controls);
    for (const auto& z : spec.instruments) {
        if (normalize_term(z) == normalize_term(spec.treatment)) {
            fail(ErrorCode::ParseFailure, "treatment '" + spec.treatment + "' also listed as instrument");
        }
    }
    if (spec.instruments.empty()) fail(ErrorCode::ParseFailure, "no excluded instruments in: " + spec.command);
}

IVSpecification parse_manual(const RawIVCall& call, const MacroTable& macros) {
    const StataParts first = split_stata(substitute_macros(call.first_stage, macros, nullptr));
    const StataParts second = split_stata(substitute_macros(call.text, macros, nullptr));
    IVSpecification spec;
    const auto x1 = expand_varlist(first.varlist);
    const auto x2 = expand_varlist(second.varlist);
    if (x1.size() < 2 || x2.size() < 2) fail(ErrorCode::ParseFailure, "manual two-stage pattern too short");
    spec.treatment = x1.front();
    spec.outcome = x2.front();
    // second stage regressors except the fitted value name (first after outcome that is not in stage one)
    std::vector<std::string> rhs2(x2.begin() + 1, x2.end());
    std::vector<std::string> rhs1(x1.begin() + 1, x1.end());
    std::vector<std::string> controls;
    for (const auto& t : rhs2) {
        if (std::find(rhs1.begin(), rhs1.end(), t) != rhs1.end()) controls.push_back(t);
    }
    spec.controls = controls;
    spec.instruments = subtract(rhs1, controls);
    spec.if_condition = second.if_condition;
    spec.weight = second.weight;
    apply_stata_options(second, spec);
    spec.estimator = "manual_2sls";
    return spec;
}

}  // namespace

IVSpecification parse_stata_iv(const RawIVCall& call) { return parse_stata_iv(call, call.macros); }

IVSpecification parse_stata_iv(const RawIVCall& call, const MacroTable& macros) {
    std::vector<std::string> unresolved;
    const std::string text = substitute_macros(call.text, macros, &unresolved);
    if (!unresolved.empty()) {
        std::string list;
        for (const auto& u : unresolved) list += (list.empty() ? "" : ", ") + u;
        fail(ErrorCode::UnresolvedMacro, "undefined macro " + list + " in: " + call.text);
    }

    IVSpecification spec;
    if (call.manual) {
        spec = parse_manual(call, macros);
    } else {
        const StataParts p = split_stata(text);
        const auto vars = expand_varlist(p.varlist);
        if (vars.empty()) fail(ErrorCode::ParseFailure, "no dependent variable in: " + text);
        if (p.iv_group.empty()) fail(ErrorCode::ParseFailure, "no (endogenous = instruments) group in: " + text);
        const auto eq = find_top_level(p.iv_group, '=');
        const auto endog = expand_varlist(split_top_level(std::string_view(p.iv_group).substr(0, eq)));
        const auto inst = expand_varlist(split_top_level(std::string_view(p.iv_group).substr(eq + 1)));
        if (endog.size() != 1) fail(ErrorCode::ParseFailure, "expected one endogenous regressor in: " + p.iv_group);
        spec.outcome = vars.front();
        spec.controls.assign(vars.begin() + 1, vars.end());
        spec.treatment = endog.front();
        spec.instruments = inst;
        spec.weight = p.weight;
        spec.if_condition = p.if_condition;
        spec.estimator = call.verb;
        apply_stata_options(p, spec);
    }
    spec.software = Language::Stata;
    spec.source_file = call.source_file;
    spec.line = call.first_line;
    spec.command = text;
    spec.table_ref = call.table_ref;
    spec.nonlinear = call.nonlinear;
    spec.wrapped = call.wrapped;
    spec.panel = call.panel;
    if (spec.panel_fe && spec.panel && !spec.panel->unit.empty() && spec.fixed_effects.empty()) {
        spec.fixed_effects.push_back(spec.panel->unit);
    }
    validate(spec);
    return spec;
}

namespace detail {

std::vector<RawIVCall> detect_stata_calls(const SourceScript& script) {
    std::vector<RawIVCall> calls;
    const StataSegmentation seg = segment_stata(script.text);
    MacroTable macros;
    std::set<std::string> wrapper_programs;
    std::optional<PanelDecl> panel;
    std::optional<std::string> pending_table;

    // program define blocks: name -> wraps an IV verb
    {
        std::string current;
        for (const auto& cmd : seg.commands) {
            const auto words = split_top_level(cmd.body);
            if (cmd.verb == "program" && words.size() >= 2) {
                std::string name = words[1];
                if (to_lower(name) == "define" || to_lower(name) == "def") name = words.size() >= 3 ? words[2] : "";
                if (!name.empty() && name.back() == ',') name.pop_back();
                current = to_lower(name);
                if (current == "drop" || current == "dir" || current == "list") current.clear();
            } else if (cmd.verb == "end") {
                current.clear();
            } else if (!current.empty() && is_iv_statement(cmd.verb, cmd.body)) {
                wrapper_programs.insert(current);
            }
        }
    }

    std::size_t seg_index = 0;
    bool in_program = false;
    struct PendingFirst {
        std::string text;
        std::string fitted;
    };
    std::optional<StataCommand> last_regress;
    std::optional<PendingFirst> pending_manual;

    for (const auto& original : seg.commands) {
        // comments between the previous command and this one
        while (seg_index < seg.segments.size() && seg.segments[seg_index].begin < original.begin) {
            const auto& s = seg.segments[seg_index];
            if (s.kind == Segment::Kind::Trivia) {
                if (auto t = table_reference(std::string_view(script.text).substr(s.begin, s.end - s.begin))) pending_table = t;
            }
            ++seg_index;
        }
        std::vector<std::string> unresolved;
        StataCommand cmd = original;
        const std::string expanded = substitute_macros(cmd.text, macros, &unresolved);
        StataCommand ex = cmd;
        ex.text = expanded;
        ex.prefixes.clear();
        split_prefixes(expanded, ex.prefixes, ex.body);
        ex.verb = canonical_verb(split_top_level(ex.body).empty() ? "" : split_top_level(ex.body).front());
        record_macro_definition(ex, macros);

        if (ex.verb == "program") {
            const auto words = split_top_level(ex.body);
            const std::string sub = words.size() >= 2 ? to_lower(words[1]) : "";
            in_program = sub != "drop" && sub != "dir" && sub != "list";
            continue;
        }
        if (ex.verb == "end") {
            in_program = false;
            continue;
        }
        if (in_program) continue;

        if (ex.verb == "xtset" || ex.verb == "tsset") {
            const auto comma = find_top_level(ex.body, ',');
            auto words = split_top_level(std::string_view(ex.body).substr(0, comma));
            if (words.size() == 3) panel = PanelDecl{words[1], words[2]};
            else if (words.size() == 2) panel = PanelDecl{ex.verb == "xtset" ? words[1] : "", ex.verb == "tsset" ? words[1] : ""};
            continue;
        }

        RawIVCall call;
        call.source_file = script.path;
        call.language = Language::Stata;
        call.text = cmd.text;
        call.begin = cmd.begin;
        call.end = cmd.end;
        call.first_line = cmd.first_line;
        call.last_line = cmd.last_line;
        call.mode = cmd.mode;
        call.panel = panel;
        call.macros = macros;
        call.unresolved_macros = unresolved;
        call.wrapped = std::any_of(ex.prefixes.begin(), ex.prefixes.end(), [](const std::string& p) { return is_wrapper_prefix(p); });

        bool found = false;
        if (is_iv_statement(ex.verb, ex.body)) {
            call.verb = ex.verb;
            found = true;
        } else if (ex.verb == "parmby" || ex.verb == "statsby" || ex.verb == "simulate") {
            if (auto inner = quoted_command(ex.body)) {
                std::vector<std::string> pre;
                std::string body;
                split_prefixes(*inner, pre, body);
                const auto words = split_top_level(body);
                const std::string v = words.empty() ? "" : canonical_verb(words.front());
                if (is_iv_statement(v, body)) {
                    call.verb = v;
                    call.text = *inner;
                    call.wrapped = true;
                    found = true;
                }
            }
        } else if (wrapper_programs.count(ex.verb)) {
            call.verb = ex.verb;
            found = true;
        }

        if (!found && ex.verb == "regress") {
            const auto words = split_top_level(std::string_view(ex.body).substr(0, find_top_level(ex.body, ',')));
            if (pending_manual && words.size() > 2 &&
                std::find(words.begin() + 2, words.end(), pending_manual->fitted) != words.end()) {
                call.verb = "regress";
                call.manual = true;
                call.first_stage = pending_manual->text;
                found = true;
                pending_manual.reset();
            } else {
                last_regress = ex;
                pending_manual.reset();
            }
        } else if (!found && ex.verb == "predict" && last_regress) {
            const auto comma = find_top_level(ex.body, ',');
            const auto words = split_top_level(std::string_view(ex.body).substr(0, comma));
            const std::string opts = comma == std::string::npos ? "" : to_lower(ex.body.substr(comma + 1));
            if (words.size() >= 2 && opts.find("resid") == std::string::npos) {
                pending_manual = PendingFirst{last_regress->text, words.back()};
            }
            continue;
        }

        if (found) {
            call.nonlinear = call.verb == "ivprobit" || call.verb == "ivtobit";
            call.table_ref = pending_table;
            calls.push_back(std::move(call));
        }
    }
    return calls;
}

}  // namespace detail

}  // namespace ivrepro::parser
