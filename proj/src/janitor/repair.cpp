#include "ivrepro/janitor/janitor.hpp"

#include "ivrepro/error.hpp"
#include "ivrepro/parser/iv.hpp"
#include "text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <set>

namespace ivrepro::janitor {

using namespace parser;
using detail::Edit;
using detail::LineIndex;

const std::vector<RepairRule>& rule_registry() {
    static const std::vector<RepairRule> rules{
        {"path.cd", 1, "cd/chdir/setwd/os.chdir to an absolute or macro path", RuleAction::CommentOut},
        {"path.global", 1, "global macro holding an absolute path: references inlined, definition commented", RuleAction::Rewrite},
        {"path.absolute", 1, "absolute path string in a file command or string literal", RuleAction::Rewrite},
        {"path.do_stem", 1, "do/run/include of a missing file with one near-named package do-file", RuleAction::Rewrite},
        {"data.tab", 3, "use of a tab-separated Dataverse export", RuleAction::Rewrite},
        {"gen.backup", 3, "capture drop X directly followed by generate X", RuleAction::Rewrite},
        {"merge.legacy", 5, "merge varlist using file without a match type", RuleAction::Rewrite},
        {"iv.nontarget", 5, "IV estimation command that is not an extraction target", RuleAction::CommentOut},
        {"graphics.command", 8, "graphics command or plotting call", RuleAction::CommentOut},
        {"interactive.command", 8, "interactive command or call", RuleAction::CommentOut},
        {"output.command", 8, "table output or log command", RuleAction::CommentOut},
        {"package.deprecated", 9, "library()/require() of a retired package", RuleAction::CommentOut},
        {"block.parmest", 10, "parmest through the restore closing its preserve", RuleAction::CommentOut},
        {"export.inject", 10, "data export and estimate marker after a target command", RuleAction::Inject},
    };
    return rules;
}

nlohmann::json to_json(const std::vector<CleaningLogEntry>& log) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : log) {
        j.push_back({{"file", e.file}, {"line", e.line}, {"rule_id", e.rule_id}, {"original", e.original}, {"replacement", e.replacement}});
    }
    return j;
}

RepairConfig load_repair_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ValidationError, path.string() + ": " + e.what());
    }
    RepairConfig c;
    auto read = [&](const char* key, std::vector<std::string>& dst) {
        if (j.contains(key)) dst = j[key].get<std::vector<std::string>>();
    };
    read("deprecated_packages", c.deprecated_packages);
    read("stata_graphics", c.stata_graphics);
    read("stata_interactive", c.stata_interactive);
    read("stata_output", c.stata_output);
    read("r_calls", c.r_calls);
    read("python_calls", c.python_calls);
    return c;
}

namespace {

bool contains(const std::vector<std::string>& v, std::string_view s) { return std::find(v.begin(), v.end(), s) != v.end(); }

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Collects edits and their log entries; one rule instance per span.
class Editor {
public:
    Editor(const SourceScript& script) : script_(script), lines_(script.text) {}

    const LineIndex& lines() const { return lines_; }

    void replace(std::size_t begin, std::size_t end, std::string replacement, const std::string& rule) {
        const std::string original = script_.text.substr(begin, end - begin);
        if (original == replacement) return;
        log_.push_back({script_.path, lines_.line_of(begin), rule, original, replacement});
        edits_.push_back({begin, end, std::move(replacement)});
    }

    // One edit whose rules applied in sequence; each step gets its own entry.
    void replace_steps(std::size_t begin, std::size_t end, const std::vector<std::pair<std::string, std::string>>& steps) {
        std::string before = script_.text.substr(begin, end - begin);
        for (const auto& [rule, after] : steps) {
            log_.push_back({script_.path, lines_.line_of(begin), rule, before, after});
            before = after;
        }
        edits_.push_back({begin, end, before});
    }

    // Whole lines, each prefixed with `mark` after its indentation.
    void comment_lines(int first, int last, const std::string& rule, std::string_view mark, std::string_view first_mark = {}) {
        const auto b = lines_.begin_of(first);
        const auto e = lines_.content_end_of(last);
        const std::string_view block = std::string_view(script_.text).substr(b, e - b);
        std::string out = detail::comment_lines(block, mark);
        if (!first_mark.empty()) {
            const auto indent = detail::leading_space(block);
            out = indent + std::string(first_mark) + out.substr(indent.size() + mark.size());
        }
        replace(b, e, out, rule);
    }

    RepairResult finish() {
        RepairResult r;
        r.text = detail::apply_edits(script_.text, edits_);
        std::stable_sort(log_.begin(), log_.end(), [](const auto& a, const auto& b) { return a.line < b.line; });
        r.log = std::move(log_);
        return r;
    }

private:
    const SourceScript& script_;
    LineIndex lines_;
    std::vector<Edit> edits_;
    std::vector<CleaningLogEntry> log_;
};

// ---------------------------------------------------------------- Stata

struct StataPass {
    const SourceScript& script;
    const RepairConfig& config;
    bool backup_only = false;
    std::vector<StataCommand> cmds;
    Editor ed;
    std::map<std::string, std::string> path_globals;

    StataPass(const SourceScript& s, const RepairConfig& c, bool only) : script(s), config(c), backup_only(only), ed(s) {
        cmds = segment_stata(s.text).commands;
    }

    bool exclusive(std::size_t i, std::size_t j) const {
        const int first = cmds[i].first_line;
        const int last = cmds[j].last_line;
        for (std::size_t k = 0; k < cmds.size(); ++k) {
            if (k >= i && k <= j) continue;
            if (cmds[k].first_line <= last && cmds[k].last_line >= first) return false;
        }
        return true;
    }

    // end of the command without its terminating newline
    std::size_t content_end(const StataCommand& c) const {
        std::size_t e = c.end;
        while (e > c.begin && (script.text[e - 1] == '\n' || script.text[e - 1] == '\r')) --e;
        return e;
    }

    void comment(std::size_t i, std::size_t j, const std::string& rule) {
        if (exclusive(i, j)) {
            ed.comment_lines(cmds[i].first_line, cmds[j].last_line, rule, "// ");
        } else if (i == j) {
            const auto& c = cmds[i];
            ed.replace(c.begin, content_end(c), "/* " + script.text.substr(c.begin, content_end(c) - c.begin) + " */", rule);
        }
    }

    std::string raw(const StataCommand& c) const { return script.text.substr(c.begin, content_end(c) - c.begin); }

    // offset of the written verb inside the raw command
    std::size_t verb_offset(const StataCommand& c, const std::string& r) const {
        const auto words = split_top_level(c.body);
        if (words.empty()) return 0;
        const std::string w = to_lower(words[0]);
        const std::string lr = to_lower(r);
        for (std::size_t p = lr.find(w); p != std::string::npos; p = lr.find(w, p + 1)) {
            const bool left = p == 0 || !ident_char(lr[p - 1]);
            const bool right = p + w.size() >= lr.size() || !ident_char(lr[p + w.size()]);
            if (left && right) return p;
        }
        return 0;
    }

    bool is_iv(const StataCommand& c) const {
        return c.verb.rfind("iv", 0) == 0 || c.verb.rfind("xtiv", 0) == 0 || c.verb == "reghdfe";
    }

    std::optional<std::size_t> parmest_end(std::size_t i) const {
        int depth = 0;
        for (std::size_t k = 0; k < i; ++k) depth += preserve_delta(cmds[k]);
        if (depth <= 0) return std::nullopt;
        int local = depth;
        for (std::size_t k = i + 1; k < cmds.size(); ++k) {
            if (cmds[k].verb == "restore" && local == depth && preserve_delta(cmds[k]) < 0) return k;
            local += preserve_delta(cmds[k]);
        }
        return std::nullopt;
    }

    static int preserve_delta(const StataCommand& c) {
        if (c.verb == "preserve") return 1;
        if (c.verb == "restore") return to_lower(c.body).find("preserve") == std::string::npos ? -1 : 0;
        return 0;
    }

    std::optional<std::string> backup_target(std::size_t i) const {
        if (i + 1 >= cmds.size()) return std::nullopt;
        const auto& d = cmds[i];
        const auto& g = cmds[i + 1];
        if (d.verb != "drop" || !d.has_prefix("capture") || g.verb != "generate") return std::nullopt;
        const auto words = split_top_level(d.body);
        if (words.size() != 2) return std::nullopt;
        static const std::regex gen(R"(^\s*\S+\s+(?:(?:byte|int|long|float|double|str[0-9]+|strL)\s+)?([A-Za-z_][A-Za-z0-9_]*)\s*=)");
        std::smatch m;
        if (!std::regex_search(g.body, m, gen) || m[1].str() != words[1]) return std::nullopt;
        return words[1];
    }

    void backup(std::size_t i, const std::string& var) {
        if (!exclusive(i, i + 1)) return;
        const auto& g = cmds[i + 1];
        const std::string indent = detail::leading_space(script.text.substr(ed.lines().begin_of(cmds[i].first_line)));
        const std::string bak = ("__jbk_" + var).substr(0, 32);
        std::vector<std::string> lines{
            "capture confirm variable " + var + ", exact",
            "if !_rc {",
            "    rename " + var + " " + bak,
            "}",
            "capture noisily " + g.text,
            "if _rc {",
            "    capture confirm variable " + bak + ", exact",
            "    if !_rc {",
            "        capture drop " + var,
            "        rename " + bak + " " + var,
            "    }",
            "}",
            "else {",
            "    capture drop " + bak,
            "}",
        };
        if (cmds[i].mode == DelimiterMode::Semicolon) {
            lines.insert(lines.begin(), "#delimit cr");
            lines.push_back("#delimit ;");
        }
        std::string out;
        for (std::size_t k = 0; k < lines.size(); ++k) {
            const bool directive = lines[k].rfind("#delimit", 0) == 0;
            out += (k ? "\n" : "") + (directive ? std::string() : indent) + lines[k];
        }
        ed.replace(ed.lines().begin_of(cmds[i].first_line), ed.lines().content_end_of(g.last_line), out, "gen.backup");
    }

    // first argument after the verb: quoted or bare
    static std::optional<std::pair<std::size_t, std::string>> first_arg(const std::string& r, std::size_t from) {
        std::size_t p = from;
        while (p < r.size() && std::isspace(static_cast<unsigned char>(r[p]))) ++p;
        if (p >= r.size()) return std::nullopt;
        if (r[p] == '"') {
            const auto q = r.find('"', p + 1);
            if (q == std::string::npos) return std::nullopt;
            return std::make_pair(p + 1, r.substr(p + 1, q - p - 1));
        }
        std::size_t q = p;
        while (q < r.size() && !std::isspace(static_cast<unsigned char>(r[q])) && r[q] != ',' && r[q] != ';') ++q;
        return std::make_pair(p, r.substr(p, q - p));
    }

    bool package_has(const std::string& f) const {
        std::string n = f;
        std::replace(n.begin(), n.end(), '\\', '/');
        if (n.rfind("./", 0) == 0) n = n.substr(2);
        return contains(config.package_files, n);
    }

    static std::string stem_of(const std::string& f) {
        const auto slash = f.find_last_of("/\\");
        const auto dot = f.find_last_of('.');
        return f.substr(0, dot == std::string::npos || (slash != std::string::npos && dot < slash) ? f.size() : dot);
    }

    static bool has_ext(const std::string& f) {
        const auto slash = f.find_last_of("/\\");
        const auto dot = f.find_last_of('.');
        return dot != std::string::npos && (slash == std::string::npos || dot > slash);
    }

    std::string rewrite_tab(const StataCommand& c, std::string r) const {
        if (c.verb != "use" || to_lower(c.body).find(" using ") != std::string::npos) return r;
        const auto v = verb_offset(c, r);
        const auto arg = first_arg(r, v + split_top_level(c.body)[0].size());
        if (!arg) return r;
        const std::string& f = arg->second;
        std::string tab;
        if (to_lower(f).size() > 4 && to_lower(f).substr(f.size() - 4) == ".tab") {
            tab = f;
        } else if (!config.package_files.empty()) {
            const std::string s = has_ext(f) ? stem_of(f) : f;
            if ((has_ext(f) && to_lower(f).substr(f.size() - 4) != ".dta")) return r;
            if (!package_has(s + ".dta") && package_has(s + ".tab")) tab = s + ".tab";
        }
        if (tab.empty()) return r;
        return r.substr(0, v) + "import delimited using \"" + tab + "\", delimiter(tab) varnames(1) clear";
    }

    std::string rewrite_merge(const StataCommand& c, std::string r) const {
        if (c.verb != "merge") return r;
        const auto words = split_top_level(c.body);
        if (words.size() < 3) return r;
        static const std::regex kind(R"(^[1mM]:[1mM]$)");
        if (std::regex_match(words[1], kind)) return r;
        std::size_t using_at = 0;
        for (std::size_t k = 1; k < words.size(); ++k)
            if (to_lower(words[k]) == "using") using_at = k;
        if (using_at == 0) return r;
        const auto v = verb_offset(c, r);
        std::size_t p = v + words[0].size();
        while (p < r.size() && (r[p] == ' ' || r[p] == '\t')) ++p;
        return r.substr(0, p) + (using_at == 1 ? "1:1 _n " : "m:1 ") + r.substr(p);
    }

    std::string rewrite_do(const StataCommand& c, std::string r) const {
        if ((c.verb != "do" && c.verb != "run" && c.verb != "include") || config.package_files.empty()) return r;
        const auto v = verb_offset(c, r);
        const auto arg = first_arg(r, v + split_top_level(c.body)[0].size());
        if (!arg || arg->second.find_first_of("$`") != std::string::npos) return r;
        std::string want = arg->second;
        std::replace(want.begin(), want.end(), '\\', '/');
        if (!has_ext(want)) want += ".do";
        if (package_has(want)) return r;
        const std::string stem = to_lower(stem_of(want.substr(want.find_last_of('/') == std::string::npos ? 0 : want.find_last_of('/') + 1)));
        std::vector<std::string> hits;
        for (const auto& f : config.package_files) {
            if (f.size() < 3 || to_lower(f.substr(f.size() - 3)) != ".do") continue;
            const auto name = f.substr(f.find_last_of('/') == std::string::npos ? 0 : f.find_last_of('/') + 1);
            const std::string s = to_lower(stem_of(name));
            const bool prefix = s.rfind(stem, 0) == 0 || stem.rfind(s, 0) == 0;
            if (prefix && std::min(s.size(), stem.size()) >= 3) hits.push_back(f);
        }
        if (hits.size() != 1) return r;
        return r.substr(0, arg->first) + hits[0] + r.substr(arg->first + arg->second.size());
    }

    std::string inline_globals(std::string r) const {
        for (int round = 0; round < 8; ++round) {
            bool changed = false;
            for (const auto& [name, value] : path_globals) {
                for (const std::string& pat : {"${" + name + "}", "$" + name}) {
                    for (auto p = r.find(pat); p != std::string::npos; p = r.find(pat, p)) {
                        const auto after = p + pat.size();
                        if (pat[1] != '{' && after < r.size() && ident_char(r[after])) {
                            p = after;
                            continue;
                        }
                        r.replace(p, pat.size(), value);
                        p += value.size();
                        changed = true;
                    }
                }
            }
            if (!changed) break;
        }
        return r;
    }

    std::string relativize_strings(std::string r, bool bare) const {
        std::string out;
        std::size_t pos = 0;
        while (pos < r.size()) {
            if (r[pos] == '"') {
                const auto q = r.find('"', pos + 1);
                if (q == std::string::npos) break;
                const std::string inner = r.substr(pos + 1, q - pos - 1);
                out += '"' + (detail::is_absolute_path(inner) ? detail::relativize(inner, config.package_files) : inner) + '"';
                pos = q + 1;
                continue;
            }
            const bool boundary = pos == 0 || std::isspace(static_cast<unsigned char>(r[pos - 1]));
            if (bare && boundary) {
                std::size_t q = pos;
                while (q < r.size() && !std::isspace(static_cast<unsigned char>(r[q])) && r[q] != ',' && r[q] != '"' && r[q] != ';') ++q;
                const std::string tok = r.substr(pos, q - pos);
                if (q > pos && detail::is_absolute_path(tok)) {
                    out += detail::relativize(tok, config.package_files);
                    pos = q;
                    continue;
                }
            }
            out += r[pos++];
        }
        out += r.substr(pos);
        return out;
    }

    bool file_command(const StataCommand& c) const {
        static const std::set<std::string> verbs{"use",    "save",  "saveold", "merge", "append", "joinby", "cross",
                                                 "import", "insheet", "outsheet", "export", "do",     "run",   "include",
                                                 "infile", "infix", "erase",   "copy",  "sysuse", "odbc"};
        if (verbs.count(c.verb)) return true;
        for (const auto& w : split_top_level(c.body))
            if (to_lower(w) == "using") return true;
        return false;
    }

    RepairResult run() {
        std::vector<bool> done(cmds.size(), false);
        for (std::size_t i = 0; i < cmds.size(); ++i) {
            if (done[i]) continue;
            const auto& c = cmds[i];
            if (auto var = backup_target(i)) {
                backup(i, *var);
                done[i + 1] = true;
                continue;
            }
            if (backup_only) continue;

            if (c.verb == "global") {
                const auto words = split_top_level(c.body);
                if (words.size() >= 3) {
                    std::string value = trim_copy(c.body.substr(c.body.find(words[1]) + words[1].size()));
                    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
                    if (value.size() >= 4 && value.rfind("`\"", 0) == 0) value = value.substr(2, value.size() - 4);
                    value = inline_globals(value);
                    if (detail::is_absolute_path(value)) {
                        path_globals[words[1]] = value;
                        comment(i, i, "path.global");
                        continue;
                    }
                }
            }
            if (c.verb == "cd" || c.verb == "chdir") {
                const auto words = split_top_level(c.body);
                std::string arg = words.size() > 1 ? words[1] : "";
                if (arg.size() >= 2 && arg.front() == '"') arg = arg.substr(1, arg.size() - 2);
                if (detail::is_absolute_path(arg) || arg.find_first_of("$`") != std::string::npos) {
                    comment(i, i, "path.cd");
                    continue;
                }
            }
            if (contains(config.stata_graphics, c.verb)) {
                comment(i, i, "graphics.command");
                continue;
            }
            if (contains(config.stata_interactive, c.verb)) {
                comment(i, i, "interactive.command");
                continue;
            }
            if (contains(config.stata_output, c.verb)) {
                comment(i, i, "output.command");
                continue;
            }
            if (c.verb == "parmest") {
                std::size_t j = i;
                if (const auto e = parmest_end(i)) j = *e;
                bool has_iv = false;
                for (std::size_t k = i; k <= j; ++k) has_iv = has_iv || is_iv(cmds[k]);
                if (!has_iv && exclusive(i, j)) {
                    ed.comment_lines(cmds[i].first_line, cmds[j].last_line, "block.parmest", "// ");
                    for (std::size_t k = i; k <= j; ++k) done[k] = true;
                    continue;
                }
            }

            // rewrites compose within one command, one log entry per rule
            const std::string original = raw(c);
            std::string current = original;
            std::vector<std::pair<std::string, std::string>> steps;  // rule, text after
            auto step = [&](const std::string& rule, std::string next) {
                if (next != current) {
                    steps.emplace_back(rule, next);
                    current = std::move(next);
                }
            };
            const std::string inlined = inline_globals(current);
            if (inlined != current) step("path.global", relativize_strings(inlined, file_command(c)));
            step("data.tab", rewrite_tab(c, current));
            step("merge.legacy", rewrite_merge(c, current));
            step("path.do_stem", rewrite_do(c, current));
            if (file_command(c)) step("path.absolute", relativize_strings(current, true));
            if (!steps.empty()) ed.replace_steps(c.begin, content_end(c), steps);
        }
        return ed.finish();
    }
};

// ---------------------------------------------------------------- R / Python

std::string blank_strings(std::string_view s) {
    std::string out(s);
    char quote = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const char c = out[i];
        if (quote) {
            if (c == '\\') {
                out[i] = ' ';
                if (i + 1 < out.size()) out[++i] = ' ';
            } else if (c == quote) {
                quote = 0;
            } else {
                out[i] = ' ';
            }
        } else if (c == '"' || c == '\'') {
            quote = c;
        }
    }
    return out;
}

bool has_call(const std::string& text, const std::string& name, bool python) {
    for (auto p = text.find(name); p != std::string::npos; p = text.find(name, p + 1)) {
        if (p > 0) {
            const char before = text[p - 1];
            if (ident_char(before) || before == '.' || before == '$' || before == '@') continue;
            if (python && p >= 4 && text.compare(p - 4, 4, "def ") == 0) continue;
        }
        auto q = p + name.size();
        while (q < text.size() && text[q] == ' ') ++q;
        if (q < text.size() && text[q] == '(') return true;
    }
    return false;
}

std::string call_category(const std::string& name) {
    static const std::set<std::string> interactive{"View", "browser", "readline", "input", "breakpoint"};
    static const std::set<std::string> output{"modelsummary", "stargazer", "texreg", "screenreg", "htmlreg"};
    if (interactive.count(name)) return "interactive.command";
    if (output.count(name)) return "output.command";
    return "graphics.command";
}

RepairResult repair_line_based(const SourceScript& script, const RepairConfig& config) {
    const bool python = script.language == Language::Python;
    const auto stmts = segment_statements(script.text, script.language);
    Editor ed(script);
    const std::string mark = "# ";

    auto exclusive = [&](std::size_t i) {
        for (std::size_t k = 0; k < stmts.size(); ++k) {
            if (k == i) continue;
            if (stmts[k].first_line <= stmts[i].last_line && stmts[k].last_line >= stmts[i].first_line) return false;
        }
        return true;
    };
    auto comment = [&](std::size_t i, const std::string& rule) {
        if (!exclusive(i)) return;
        ed.comment_lines(stmts[i].first_line, stmts[i].last_line, rule, mark, python ? "pass  # " : "");
    };

    static const std::regex setwd(R"(^\s*(?:[A-Za-z_.][A-Za-z0-9_.]*\s*(?:<-|=)\s*)?(?:setwd|os\.chdir)\s*\(\s*(['"])(.*?)\1)");
    static const std::regex library(R"(^\s*(?:suppressPackageStartupMessages\s*\(\s*)?(?:library|require|requireNamespace)\s*\(\s*['"]?([A-Za-z0-9._]+)['"]?)");

    for (std::size_t i = 0; i < stmts.size(); ++i) {
        const auto& s = stmts[i];
        std::smatch m;
        if (std::regex_search(s.text, m, setwd)) {
            if (detail::is_absolute_path(m[2].str())) {
                comment(i, "path.cd");
                continue;
            }
        }
        if (!python && std::regex_search(s.text, m, library) && contains(config.deprecated_packages, m[1].str())) {
            comment(i, "package.deprecated");
            continue;
        }
        const std::string code = blank_strings(s.text);
        bool done = false;
        for (const auto& name : python ? config.python_calls : config.r_calls) {
            if (has_call(code, name, python)) {
                comment(i, call_category(name));
                done = true;
                break;
            }
        }
        if (done) continue;

        // absolute path literals in the raw statement
        const std::string raw = script.text.substr(s.begin, s.end - s.begin);
        std::string out;
        char quote = 0;
        std::size_t lit = 0;
        for (std::size_t p = 0; p < raw.size(); ++p) {
            const char c = raw[p];
            if (quote) {
                if (c == '\\' && p + 1 < raw.size() && raw[p + 1] == quote) {
                    ++p;
                    continue;
                }
                if (c == quote) {
                    const std::string inner = raw.substr(lit, p - lit);
                    out += detail::is_absolute_path(inner) ? detail::relativize(inner, config.package_files) : inner;
                    out += c;
                    quote = 0;
                }
                continue;
            }
            if (c == '#') {
                const auto nl = raw.find('\n', p);
                out += raw.substr(p, nl == std::string::npos ? std::string::npos : nl - p);
                if (nl == std::string::npos) break;
                p = nl - 1;
                continue;
            }
            out += c;
            if (c == '"' || c == '\'') {
                quote = c;
                lit = p + 1;
            }
        }
        if (quote) continue;
        ed.replace(s.begin, s.end, out, "path.absolute");
    }
    return ed.finish();
}

}  // namespace

RepairResult apply_repair_rules(const SourceScript& script, const RepairConfig& config) {
    if (script.language == Language::Stata) return StataPass(script, config, false).run();
    return repair_line_based(script, config);
}

RepairResult rewrite_capture_drop(const SourceScript& script) {
    if (script.language != Language::Stata) return {script.text, {}};
    const RepairConfig config;
    return StataPass(script, config, true).run();
}

}  // namespace ivrepro::janitor
