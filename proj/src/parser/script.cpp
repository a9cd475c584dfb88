#include "ivrepro/parser/script.hpp"

#include "ivrepro/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

namespace ivrepro::parser {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }
bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool starts_with_word(std::string_view s, std::string_view word) {
    if (s.size() < word.size() || s.substr(0, word.size()) != word) return false;
    return s.size() == word.size() || !is_name_char(s[word.size()]);
}

// Scanner over the raw script text that tracks line numbers.
class Cursor {
public:
    explicit Cursor(std::string_view text) : text_(text) {}

    [[nodiscard]] bool done() const { return pos_ >= text_.size(); }
    [[nodiscard]] char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
    }
    [[nodiscard]] bool at(std::string_view s) const { return text_.substr(pos_, s.size()) == s; }
    [[nodiscard]] std::size_t pos() const { return pos_; }
    [[nodiscard]] int line() const { return line_; }
    // True when only blanks precede the cursor on the current physical line.
    [[nodiscard]] bool preceded_by_blank() const { return pos_ == 0 || is_space(text_[pos_ - 1]); }

    char advance() {
        const char c = text_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }
    void skip_to_eol() {
        while (!done() && peek() != '\n') advance();
    }
    // Nested /* */ comment; the cursor sits on "/*".
    void skip_block_comment() {
        int depth = 0;
        while (!done()) {
            if (at("/*")) {
                ++depth;
                advance();
                advance();
            } else if (at("*/")) {
                --depth;
                advance();
                advance();
                if (depth == 0) return;
            } else {
                advance();
            }
        }
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

int line_of_last_char(const Cursor& c, std::string_view text, std::size_t end) {
    // Lines are counted at the cursor; a span ending with '\n' belongs to the previous line.
    return (end > 0 && text[end - 1] == '\n') ? c.line() - 1 : c.line();
}

const std::array<std::string_view, 5> kCapture = {"cap", "capt", "captu", "captur", "capture"};
const std::array<std::string_view, 5> kQuietly = {"qui", "quie", "quiet", "quietl", "quietly"};
const std::array<std::string_view, 7> kNoisily = {"n", "no", "noi", "nois", "noisi", "noisil", "noisily"};
const std::array<std::string_view, 19> kColonPrefixes = {
    "by",       "bys",      "bysort",  "xi",      "eststo",  "estpost", "svy",     "bootstrap", "bs",     "jackknife",
    "jknife",   "statsby",  "simulate", "permute", "rolling", "nestreg", "stepwise", "version",  "mi"};
const std::array<std::string_view, 8> kWrappers = {"bootstrap", "bs",      "jackknife", "jknife",
                                                   "statsby",   "simulate", "permute",  "rolling"};

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& list, std::string_view w) {
    return std::find(list.begin(), list.end(), w) != list.end();
}

std::string first_word(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && !is_space(s[i]) && s[i] != ':' && s[i] != ',' && s[i] != '(' && s[i] != '"') ++i;
    return std::string(s.substr(0, i));
}

void finish_command(StataCommand& cmd, const std::string& raw) {
    cmd.text = collapse_spaces(trim_copy(raw));
    cmd.prefixes.clear();
    split_prefixes(cmd.text, cmd.prefixes, cmd.body);
    cmd.verb = canonical_verb(first_word(cmd.body));
}

}  // namespace

std::string_view to_string(Language lang) noexcept {
    switch (lang) {
        case Language::Stata: return "stata";
        case Language::R: return "r";
        case Language::Python: return "python";
    }
    return "stata";
}

std::optional<Language> language_from_string(std::string_view s) noexcept {
    if (s == "stata") return Language::Stata;
    if (s == "r") return Language::R;
    if (s == "python") return Language::Python;
    return std::nullopt;
}

std::optional<Language> language_for_path(const std::filesystem::path& path) {
    const auto ext = to_lower(path.extension().string());
    if (ext == ".do" || ext == ".ado") return Language::Stata;
    if (ext == ".r") return Language::R;
    if (ext == ".py") return Language::Python;
    return std::nullopt;
}

std::string sanitize_utf8(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    std::size_t i = 0;
    while (i < bytes.size()) {
        const auto c = static_cast<unsigned char>(bytes[i]);
        std::size_t len = 0;
        if (c < 0x80) len = 1;
        else if ((c >> 5) == 0x6) len = 2;
        else if ((c >> 4) == 0xE) len = 3;
        else if ((c >> 3) == 0x1E) len = 4;
        bool ok = len > 0 && i + len <= bytes.size();
        for (std::size_t k = 1; ok && k < len; ++k) ok = (static_cast<unsigned char>(bytes[i + k]) >> 6) == 0x2;
        if (ok) {
            out.append(bytes.substr(i, len));
            i += len;
        } else {
            out += "\xEF\xBF\xBD";
            ++i;
        }
    }
    return out;
}

SourceScript load_script(const std::filesystem::path& file, const std::filesystem::path& package_root) {
    const auto lang = language_for_path(file);
    if (!lang) fail(ErrorCode::ParseFailure, "not a script: " + file.string());
    std::ifstream in(file, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    SourceScript script;
    script.path = std::filesystem::relative(file, package_root).generic_string();
    script.language = *lang;
    script.text = sanitize_utf8(ss.str());
    return script;
}

bool StataCommand::has_prefix(std::string_view p) const {
    return std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& x) { return starts_with_word(x, p); });
}

std::optional<DelimiterMode> parse_delimit_directive(std::string_view line) {
    static const std::regex re(R"(^[ \t]*#d(?:e(?:l(?:i(?:m(?:i(?:t)?)?)?)?)?)?[ \t]+(;|cr)[ \t]*(?://.*)?\r?\n?$)",
                               std::regex::icase);
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(line.begin(), line.end(), m, re)) return std::nullopt;
    return m[1].str() == ";" ? DelimiterMode::Semicolon : DelimiterMode::Newline;
}

StataSegmentation segment_stata(std::string_view text) {
    StataSegmentation out;
    Cursor cur(text);
    DelimiterMode mode = DelimiterMode::Newline;

    auto push = [&](Segment::Kind kind, std::size_t begin, int first_line, DelimiterMode m) {
        Segment seg;
        seg.kind = kind;
        seg.begin = begin;
        seg.end = cur.pos();
        seg.first_line = first_line;
        seg.last_line = line_of_last_char(cur, text, seg.end);
        seg.mode = m;
        out.segments.push_back(seg);
    };

    while (!cur.done()) {
        // Whitespace, comments and empty statements between commands.
        const std::size_t trivia_begin = cur.pos();
        const int trivia_line = cur.line();
        while (!cur.done()) {
            const char c = cur.peek();
            if (is_space(c)) {
                cur.advance();
            } else if (mode == DelimiterMode::Semicolon && c == ';') {
                cur.advance();
            } else if (cur.at("/*")) {
                cur.skip_block_comment();
            } else if (cur.at("//")) {
                cur.skip_to_eol();
            } else if (c == '*') {
                if (mode == DelimiterMode::Newline) {
                    cur.skip_to_eol();
                } else {
                    while (!cur.done() && cur.peek() != ';') cur.advance();
                    if (!cur.done()) cur.advance();
                }
            } else {
                break;
            }
        }
        if (cur.pos() > trivia_begin) push(Segment::Kind::Trivia, trivia_begin, trivia_line, mode);
        if (cur.done()) break;

        const std::size_t begin = cur.pos();
        const int first_line = cur.line();

        if (cur.peek() == '#') {
            const auto eol = text.find('\n', begin);
            const auto line_end = eol == std::string_view::npos ? text.size() : eol + 1;
            if (auto m = parse_delimit_directive(text.substr(begin, line_end - begin))) {
                while (cur.pos() < line_end) cur.advance();
                push(Segment::Kind::Directive, begin, first_line, mode);
                mode = *m;
                continue;
            }
        }

        StataCommand cmd;
        cmd.begin = begin;
        cmd.first_line = first_line;
        cmd.mode = mode;
        std::string raw;
        bool terminated = false;
        while (!cur.done()) {
            const char c = cur.peek();
            if (c == '"') {
                raw.push_back(cur.advance());
                while (!cur.done() && cur.peek() != '"' && cur.peek() != '\n') raw.push_back(cur.advance());
                if (!cur.done() && cur.peek() == '"') raw.push_back(cur.advance());
            } else if (c == '`' && cur.peek(1) == '"') {
                // compound quotes `"..."', nestable
                int depth = 0;
                while (!cur.done()) {
                    if (cur.at("`\"")) {
                        ++depth;
                        raw.push_back(cur.advance());
                        raw.push_back(cur.advance());
                    } else if (cur.at("\"'")) {
                        --depth;
                        raw.push_back(cur.advance());
                        raw.push_back(cur.advance());
                        if (depth == 0) break;
                    } else if (cur.peek() == '\n') {
                        break;
                    } else {
                        raw.push_back(cur.advance());
                    }
                }
            } else if (cur.at("/*")) {
                cur.skip_block_comment();
                raw.push_back(' ');
            } else if (cur.at("///") && cur.preceded_by_blank()) {
                cur.skip_to_eol();
                if (!cur.done()) cur.advance();
                raw.push_back(' ');
            } else if (cur.at("//") && cur.preceded_by_blank()) {
                cur.skip_to_eol();
            } else if (mode == DelimiterMode::Newline && c == '\n') {
                cur.advance();
                terminated = true;
                break;
            } else if (mode == DelimiterMode::Semicolon && c == ';') {
                cur.advance();
                terminated = true;
                break;
            } else if (c == '\n') {
                cur.advance();
                raw.push_back(' ');
            } else {
                raw.push_back(cur.advance());
            }
        }
        cmd.end = cur.pos();
        cmd.last_line = line_of_last_char(cur, text, cmd.end);
        cmd.suspect = !terminated && mode == DelimiterMode::Semicolon;
        finish_command(cmd, raw);
        if (cmd.text.empty()) {
            push(Segment::Kind::Trivia, begin, first_line, mode);
            continue;
        }
        push(Segment::Kind::Command, begin, first_line, mode);
        out.commands.push_back(std::move(cmd));
    }
    return out;
}

std::vector<StataCommand> segment_commands(const SourceScript& script) {
    if (script.language != Language::Stata) fail(ErrorCode::ParseFailure, "segment_commands requires a Stata script");
    return segment_stata(script.text).commands;
}

std::size_t find_top_level(std::string_view s, char ch, std::size_t from) {
    int depth = 0;
    bool in_str = false;
    for (std::size_t i = from; i < s.size(); ++i) {
        const char c = s[i];
        if (in_str) {
            if (c == '"') in_str = false;
            continue;
        }
        if (c == ch && depth == 0) return i;
        if (c == '"') {
            in_str = true;
        } else if (c == '(' || c == '[' || c == '{') {
            ++depth;
        } else if (c == ')' || c == ']' || c == '}') {
            --depth;
        }
    }
    return std::string_view::npos;
}

std::vector<std::string> split_top_level(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    bool in_str = false;
    for (char c : s) {
        if (in_str) {
            cur.push_back(c);
            if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') {
            in_str = true;
        } else if (c == '(' || c == '[' || c == '{') {
            ++depth;
        } else if (c == ')' || c == ']' || c == '}') {
            --depth;
        }
        if (is_space(c) && depth == 0) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string trim_copy(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return std::string(s);
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string collapse_spaces(std::string_view s) {
    std::string out;
    bool in_str = false;
    bool pending = false;
    for (char c : s) {
        if (!in_str && is_space(c)) {
            pending = true;
            continue;
        }
        if (pending && !out.empty()) out.push_back(' ');
        pending = false;
        if (c == '"') in_str = !in_str;
        out.push_back(c);
    }
    return out;
}

void split_prefixes(std::string_view statement, std::vector<std::string>& prefixes, std::string& body) {
    std::string rest = trim_copy(statement);
    while (!rest.empty()) {
        const std::string word = first_word(rest);
        const std::string lw = to_lower(word);
        if (contains(kCapture, lw) || contains(kQuietly, lw) || contains(kNoisily, lw)) {
            prefixes.push_back(contains(kCapture, lw) ? "capture" : contains(kQuietly, lw) ? "quietly" : "noisily");
            rest = trim_copy(std::string_view(rest).substr(word.size()));
            if (!rest.empty() && rest.front() == ':') rest = trim_copy(std::string_view(rest).substr(1));
            continue;
        }
        if (contains(kColonPrefixes, lw)) {
            const auto colon = find_top_level(rest, ':');
            if (colon != std::string::npos) {
                prefixes.push_back(trim_copy(std::string_view(rest).substr(0, colon)));
                rest = trim_copy(std::string_view(rest).substr(colon + 1));
                continue;
            }
        }
        break;
    }
    body = rest;
}

bool is_wrapper_prefix(std::string_view prefix) {
    return contains(kWrappers, canonical_verb(first_word(prefix)));
}

std::string canonical_verb(std::string_view word) {
    const std::string w = to_lower(word);
    struct Abbrev {
        std::string_view full;
        std::size_t min;
    };
    static constexpr Abbrev table[] = {
        {"regress", 3}, {"generate", 1}, {"use", 1},     {"save", 2},    {"graph", 2},  {"twoway", 2},
        {"histogram", 4}, {"display", 2}, {"merge", 3},  {"rename", 3},  {"global", 2}, {"local", 3},
        {"summarize", 2}, {"tabulate", 2}, {"replace", 7}, {"append", 3}, {"predict", 4}, {"program", 3},
        {"bootstrap", 4}, {"jackknife", 4}, {"statsby", 6}, {"scatter", 2}, {"browse", 2}, {"kdensity", 2},
    };
    for (const auto& a : table) {
        if (w.size() >= a.min && w.size() <= a.full.size() && a.full.substr(0, w.size()) == w) return std::string(a.full);
    }
    if (w == "bs") return "bootstrap";
    if (w == "jknife") return "jackknife";
    if (w == "tw") return "twoway";
    if (w == "hist") return "histogram";
    if (w == "gen" || w == "g") return "generate";
    return w;
}

bool record_macro_definition(const StataCommand& cmd, MacroTable& table) {
    if (cmd.verb != "global" && cmd.verb != "local") return false;
    std::string_view rest = cmd.body;
    rest.remove_prefix(std::min(rest.size(), first_word(rest).size()));
    std::string r = trim_copy(rest);
    std::size_t i = 0;
    while (i < r.size() && is_name_char(r[i])) ++i;
    if (i == 0) return false;
    const std::string name = r.substr(0, i);
    std::string value = trim_copy(std::string_view(r).substr(i));
    if (!value.empty() && (value.front() == '=' || value.front() == ':')) {
        value = trim_copy(std::string_view(value).substr(1));
    }
    if (value.size() >= 4 && value.rfind("`\"", 0) == 0 && value.compare(value.size() - 2, 2, "\"'") == 0) {
        value = value.substr(2, value.size() - 4);
    } else if (value.size() >= 2 && value.front() == '"' && value.back() == '"' &&
               value.find('"', 1) == value.size() - 1) {
        value = value.substr(1, value.size() - 2);
    }
    (cmd.verb == "global" ? table.globals : table.locals)[name] = value;
    return true;
}

std::string substitute_macros(std::string_view text, const MacroTable& table, std::vector<std::string>* unresolved) {
    std::string current(text);
    for (int round = 0; round < 8; ++round) {
        std::string out;
        bool changed = false;
        std::size_t i = 0;
        while (i < current.size()) {
            const char c = current[i];
            if (c == '$') {
                std::string name;
                std::size_t j = i + 1;
                if (j < current.size() && current[j] == '{') {
                    const auto close = current.find('}', j);
                    if (close != std::string::npos) {
                        name = current.substr(j + 1, close - j - 1);
                        j = close + 1;
                    }
                } else if (j < current.size() && is_name_start(current[j])) {
                    while (j < current.size() && is_name_char(current[j])) ++j;
                    name = current.substr(i + 1, j - i - 1);
                }
                if (!name.empty()) {
                    if (const auto it = table.globals.find(name); it != table.globals.end()) {
                        out += it->second;
                        changed = true;
                    } else {
                        if (unresolved && std::find(unresolved->begin(), unresolved->end(), "$" + name) == unresolved->end()) {
                            unresolved->push_back("$" + name);
                        }
                        out.append(current, i, j - i);
                    }
                    i = j;
                    continue;
                }
            } else if (c == '`' && i + 1 < current.size() && current[i + 1] != '"') {
                // innermost `name'
                std::size_t j = i + 1;
                while (j < current.size() && is_name_char(current[j])) ++j;
                if (j < current.size() && current[j] == '\'' && j > i + 1) {
                    const std::string name = current.substr(i + 1, j - i - 1);
                    if (const auto it = table.locals.find(name); it != table.locals.end()) {
                        out += it->second;
                        changed = true;
                    } else {
                        const std::string ref = "`" + name + "'";
                        if (unresolved && std::find(unresolved->begin(), unresolved->end(), ref) == unresolved->end()) {
                            unresolved->push_back(ref);
                        }
                        out.append(current, i, j + 1 - i);
                    }
                    i = j + 1;
                    continue;
                }
            }
            out.push_back(c);
            ++i;
        }
        current = std::move(out);
        if (!changed) break;
    }
    return current;
}

std::vector<StataCommand> expand_macros(std::vector<StataCommand> commands, MacroTable table) {
    for (auto& cmd : commands) {
        std::vector<std::string> unresolved;
        const std::string expanded = substitute_macros(cmd.text, table, &unresolved);
        if (expanded != cmd.text) finish_command(cmd, expanded);
        cmd.unresolved_macros = std::move(unresolved);
        record_macro_definition(cmd, table);
    }
    return commands;
}

}  // namespace ivrepro::parser
