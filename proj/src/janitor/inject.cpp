#include "ivrepro/janitor/janitor.hpp"

#include "ivrepro/error.hpp"
#include "ivrepro/parser/iv.hpp"
#include "text.hpp"

#include <regex>
#include <set>

namespace ivrepro::janitor {

using namespace parser;
using detail::LineIndex;

namespace {

const std::set<std::string>& estimation_verbs() {
    static const std::set<std::string> v{
        "regress",  "areg",    "xtreg",    "reghdfe", "ivreg2",   "ivreg",    "ivregress", "xtivreg", "xtivreg2",
        "ivreghdfe", "probit", "logit",    "ologit",  "oprobit",  "mlogit",   "poisson",   "nbreg",   "tobit",
        "xtlogit",  "xtprobit", "xtpoisson", "glm",   "newey",    "prais",    "qreg",      "rreg",    "heckman",
        "ivprobit", "ivtobit", "sureg",    "reg3",    "xtabond",  "xtdpdsys", "cnsreg",    "ppmlhdfe", "ivpoisson",
        "logistic", "cloglog", "biprobit", "xtgls",   "xtscc",    "ivreg29",  "ivreg28"};
    return v;
}

std::string flat(std::string_view s) {
    std::string out;
    for (char c : s) out.push_back(c == '\n' || c == '\r' ? ' ' : c);
    return collapse_spaces(out);
}

std::size_t content_end(const std::string& text, std::size_t begin, std::size_t end) {
    while (end > begin && (text[end - 1] == '\n' || text[end - 1] == '\r')) --end;
    return end;
}

std::string export_marker(int k) { return "##REPRO_EXPORT spec=" + std::to_string(k); }

bool has_block(const std::string& text, int k) {
    const std::string m = export_marker(k);
    for (auto p = text.find(m); p != std::string::npos; p = text.find(m, p + 1)) {
        const auto after = p + m.size();
        if (after >= text.size() || !std::isdigit(static_cast<unsigned char>(text[after]))) return true;
    }
    return false;
}

std::vector<std::string> stata_block(const ExportPlan& plan) {
    const std::string& d = plan.treatment;
    std::vector<std::string> b{
        "* " + export_marker(plan.spec_index),
        "display \"" + marker_prefix(plan.spec_index) + "coef=\" strtrim(string(_b[" + d + "], \"%21.0g\")) \" se=\" strtrim(string(_se[" + d +
            "], \"%21.0g\")) \" N=\" strtrim(string(e(N), \"%21.0g\")) \"##\"",
    };
    if (plan.mode == ExportMode::EsampleFullPanel) {
        const std::string flag = plan.flag_column.value_or("janitor_esample");
        b.push_back("capture drop " + flag);
        if (plan.reestimation) b.push_back(*plan.reestimation);
        b.push_back("generate byte " + flag + " = e(sample)");
        b.push_back("export delimited using \"" + plan.export_file() + "\", nolabel replace");
        b.push_back("capture drop " + flag);
    } else {
        b.push_back("export delimited using \"" + plan.export_file() + "\", nolabel replace");
    }
    return b;
}

std::string quote_r(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out + "\"";
}

std::vector<std::string> r_block(const ExportPlan& plan) {
    const std::string k = std::to_string(plan.spec_index);
    return {
        "# " + export_marker(plan.spec_index),
        ".repro_fit <- " + plan.model_object,
        ".repro_b <- coef(.repro_fit)",
        ".repro_k <- which(names(.repro_b) %in% c(" + quote_r(plan.treatment) + ", " + quote_r("fit_" + plan.treatment) + ", " +
            quote_r("`" + plan.treatment + "`") + "))[1]",
        ".repro_se <- sqrt(diag(as.matrix(vcov(.repro_fit))))",
        "cat(sprintf(\"" + marker_prefix(plan.spec_index) + "coef=%.10g se=%.10g N=%d##\\n\", .repro_b[[.repro_k]], .repro_se[[.repro_k]], as.integer(nobs(.repro_fit))))",
        "write.csv(" + plan.data_object + ", " + quote_r(plan.export_file()) + ", row.names = FALSE)",
    };
}

std::vector<std::string> python_block(const ExportPlan& plan) {
    return {
        "# " + export_marker(plan.spec_index),
        "_repro_fit = " + plan.model_object,
        "_repro_fit = _repro_fit if hasattr(_repro_fit, \"params\") else _repro_fit.fit()",
        "print(\"" + marker_prefix(plan.spec_index) + "coef=%.10g se=%.10g N=%d##\" % (_repro_fit.params[" + quote_r(plan.treatment) +
            "], _repro_fit.std_errors[" + quote_r(plan.treatment) + "], int(_repro_fit.nobs)))",
        plan.data_object + ".to_csv(" + quote_r(plan.export_file()) + ", index=False)",
    };
}

std::string join_lines(const std::vector<std::string>& lines, const std::string& indent) {
    std::string out;
    for (const auto& l : lines) out += (l.rfind("#delimit", 0) == 0 ? std::string() : indent) + l + "\n";
    return out;
}

std::size_t find_unique(const std::string& text, const std::string& anchor) {
    if (anchor.empty()) fail(ErrorCode::AnchorNotFound, "empty anchor");
    const auto first = text.find(anchor);
    if (first == std::string::npos) fail(ErrorCode::AnchorNotFound, "anchor not found: " + flat(anchor).substr(0, 80));
    if (text.find(anchor, first + 1) != std::string::npos) {
        fail(ErrorCode::AnchorAmbiguous, "anchor occurs more than once: " + flat(anchor).substr(0, 80));
    }
    return first;
}

}  // namespace

std::string marker_prefix(int spec_index) { return "##REPRO_MARKER spec=" + std::to_string(spec_index) + " "; }

std::string ExportPlan::export_file() const { return "analysis_data_spec_" + std::to_string(spec_index) + ".csv"; }

nlohmann::json to_json(const ExportPlan& plan) {
    nlohmann::json j{{"spec_index", plan.spec_index},
                     {"language", std::string(to_string(plan.language))},
                     {"anchor", plan.anchor},
                     {"line", plan.line},
                     {"mode", plan.mode == ExportMode::PostCommand ? "post_command" : "esample_full_panel"},
                     {"restore_before", plan.restore_before},
                     {"export_file", plan.export_file()}};
    j["flag_column"] = plan.flag_column ? nlohmann::json(*plan.flag_column) : nlohmann::json(nullptr);
    j["reestimation"] = plan.reestimation ? nlohmann::json(*plan.reestimation) : nlohmann::json(nullptr);
    return j;
}

ExportPlan plan_esample(const SourceScript& script, const IVSpecification& spec, int spec_index) {
    ExportPlan plan;
    plan.spec_index = spec_index;
    plan.language = script.language;
    plan.line = spec.line;
    plan.treatment = spec.treatment;

    if (script.language != Language::Stata) {
        const auto stmts = segment_statements(script.text, script.language);
        const SourceStatement* target = nullptr;
        for (const auto& s : stmts)
            if (s.first_line <= spec.line && spec.line <= s.last_line && !target) target = &s;
        if (!target) fail(ErrorCode::AnchorNotFound, "no statement on line " + std::to_string(spec.line));
        plan.anchor = script.text.substr(target->begin, content_end(script.text, target->begin, target->end) - target->begin);
        static const std::regex assigned(R"(^\s*([A-Za-z_.][A-Za-z0-9_.]*)\s*(?:<-|=)\s*[^=])");
        std::smatch m;
        if (std::regex_search(target->text, m, assigned)) {
            plan.model_object = m[1].str();
        } else {
            plan.model_object = "(" + target->text + ")";
        }
        static const std::regex data_arg(R"(\bdata\s*=\s*(?:subset\s*\(\s*)?([A-Za-z_.][A-Za-z0-9_.]*))");
        static const std::regex formula_arg(R"(from_formula\s*\(\s*(?:"[^"]*"|'[^']*'|[A-Za-z_][A-Za-z0-9_]*)\s*,\s*([A-Za-z_][A-Za-z0-9_]*))");
        static const std::regex indexed(R"(\(\s*(?:dependent\s*=\s*)?([A-Za-z_][A-Za-z0-9_]*)\s*\[)");
        if (std::regex_search(target->text, m, data_arg) || std::regex_search(target->text, m, formula_arg) ||
            std::regex_search(target->text, m, indexed)) {
            plan.data_object = m[1].str();
        } else {
            plan.data_object = "df";
        }
        return plan;
    }

    const auto cmds = segment_stata(script.text).commands;
    std::size_t t = cmds.size();
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        if (cmds[i].first_line <= spec.line && spec.line <= cmds[i].last_line) {
            t = i;
            break;
        }
    }
    if (t == cmds.size()) fail(ErrorCode::AnchorNotFound, "no command on line " + std::to_string(spec.line));
    const auto& target = cmds[t];
    plan.anchor = script.text.substr(target.begin, content_end(script.text, target.begin, target.end) - target.begin);

    const bool esample = spec.if_condition && spec.if_condition->find("e(sample)") != std::string::npos;
    if (!esample) return plan;

    std::size_t k = t;
    for (std::size_t i = t; i-- > 0;) {
        if (estimation_verbs().count(cmds[i].verb)) {
            k = i;
            break;
        }
    }
    if (k == t) fail(ErrorCode::EsampleSourceNotFound, "no estimation command before line " + std::to_string(target.first_line));
    const auto& cond = cmds[k];
    plan.mode = ExportMode::EsampleFullPanel;
    plan.flag_column = "janitor_esample";
    std::string prefixes;
    for (const auto& p : cond.prefixes) {
        if (p == "capture" || p == "quietly" || p == "noisily") continue;
        prefixes += p + ": ";
    }
    plan.reestimation = "quietly " + prefixes + cond.body;
    plan.restore_before = cond.has_prefix("capture");
    for (std::size_t i = k + 1; i < t; ++i) {
        if (cmds[i].has_prefix("capture") && estimation_verbs().count(cmds[i].verb)) plan.restore_before = true;
    }
    return plan;
}

std::string inject_export(const std::string& text, const ExportPlan& plan) {
    if (has_block(text, plan.spec_index)) return text;
    const auto pos = find_unique(text, plan.anchor);

    if (plan.language != Language::Stata) {
        const auto stmts = segment_statements(text, plan.language);
        const LineIndex lines(text);
        int last = lines.line_of(pos + plan.anchor.size() - 1);
        for (const auto& s : stmts)
            if (s.begin <= pos && pos < s.end) last = std::max(last, s.last_line);
        const auto at = lines.after(last);
        const std::string indent = detail::leading_space(std::string_view(text).substr(lines.begin_of(lines.line_of(pos))));
        const auto block = join_lines(plan.language == Language::R ? r_block(plan) : python_block(plan), indent);
        const bool need_nl = at > 0 && text[at - 1] != '\n';
        return text.substr(0, at) + (need_nl ? "\n" : "") + block + text.substr(at);
    }

    const auto cmds = segment_stata(text).commands;
    const StataCommand* target = nullptr;
    for (const auto& c : cmds)
        if (c.begin <= pos && pos < c.end) target = &c;
    if (!target) fail(ErrorCode::AnchorNotFound, "anchor is not inside a command");
    const bool semicolon = target->mode == DelimiterMode::Semicolon;
    auto wrap = [&](std::vector<std::string> lines) {
        if (semicolon) {
            lines.insert(lines.begin(), "#delimit cr");
            lines.push_back("#delimit ;");
        }
        return lines;
    };
    const LineIndex lines(text);
    const std::string indent = detail::leading_space(std::string_view(text).substr(lines.begin_of(target->first_line)));

    std::string after = join_lines(wrap(stata_block(plan)), indent);
    std::size_t at = target->end;
    if (semicolon || at == 0 || text[at - 1] != '\n') after = "\n" + after;

    std::string out = text.substr(0, at) + after + text.substr(at);
    if (plan.restore_before && plan.reestimation) {
        std::string before = join_lines(wrap({*plan.reestimation}), indent);
        std::size_t b = target->begin;
        const auto line_start = lines.begin_of(target->first_line);
        const bool blank_before = std::string_view(text).substr(line_start, b - line_start).find_first_not_of(" \t") == std::string_view::npos;
        if (blank_before) b = line_start;
        else before = "\n" + before;
        out = out.substr(0, b) + before + out.substr(b);
    }
    return out;
}

RepairResult comment_nontarget_iv(const SourceScript& script, const std::vector<std::string>& target_anchors) {
    RepairResult r{script.text, {}};
    if (script.language != Language::Stata) return r;
    const auto cmds = segment_stata(script.text).commands;
    const LineIndex lines(script.text);
    std::vector<detail::Edit> edits;
    for (const auto& call : detect_iv_calls(script)) {
        if (call.wrapped || call.manual) continue;
        const StataCommand* cmd = nullptr;
        for (const auto& c : cmds)
            if (c.begin <= call.begin && call.begin < c.end) cmd = &c;
        if (!cmd || !cmd->has_prefix("capture")) continue;
        bool target = false;
        for (const auto& a : target_anchors) {
            const auto p = script.text.find(a);
            if (p != std::string::npos && p < cmd->end && p + a.size() > cmd->begin) target = true;
        }
        if (target) continue;
        bool alone = true;
        for (const auto& c : cmds) {
            if (&c == cmd) continue;
            if (c.first_line <= cmd->last_line && c.last_line >= cmd->first_line) alone = false;
        }
        if (!alone) continue;
        const auto b = lines.begin_of(cmd->first_line);
        const auto e = lines.content_end_of(cmd->last_line);
        const std::string original = script.text.substr(b, e - b);
        const std::string replacement = detail::comment_lines(original, "// ");
        r.log.push_back({script.path, cmd->first_line, "iv.nontarget", original, replacement});
        edits.push_back({b, e, replacement});
    }
    r.text = detail::apply_edits(script.text, edits);
    return r;
}

}  // namespace ivrepro::janitor
