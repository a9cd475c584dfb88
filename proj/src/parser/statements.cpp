#include "ivrepro/parser/iv.hpp"

#include <cctype>
#include <cstring>

namespace ivrepro::parser {

namespace {

bool continues_r_expression(const std::string& code) {
    std::size_t i = code.size();
    while (i > 0 && std::isspace(static_cast<unsigned char>(code[i - 1]))) --i;
    if (i == 0) return false;
    const char c = code[i - 1];
    if (std::strchr("+-*/^|&,~=<>!:", c)) return true;
    return c == '%' && i >= 2;  // %>% and friends
}

}  // namespace

std::vector<SourceStatement> segment_statements(std::string_view text, Language language) {
    std::vector<SourceStatement> out;
    const bool python = language == Language::Python;
    std::size_t i = 0;
    int line = 1;
    int depth = 0;
    SourceStatement cur;
    std::string code;
    bool open = false;
    std::size_t last_sig = 0;
    int last_sig_line = 1;

    auto start_if_needed = [&](std::size_t pos) {
        if (!open) {
            open = true;
            cur = SourceStatement{};
            cur.begin = pos;
            cur.first_line = line;
            code.clear();
        }
    };
    auto close = [&]() {
        if (!open) return;
        cur.end = last_sig;
        cur.last_line = last_sig_line;
        cur.text = collapse_spaces(trim_copy(code));
        if (!cur.text.empty()) out.push_back(cur);
        open = false;
        depth = 0;
    };

    while (i < text.size()) {
        const char c = text[i];
        if (c == '#') {
            while (i < text.size() && text[i] != '\n') ++i;
            continue;
        }
        if (c == '\n') {
            if (open) {
                const bool backslash = python && !code.empty() && code.back() == '\\';
                if (backslash) code.pop_back();
                if (depth > 0 || backslash || (!python && continues_r_expression(code))) {
                    code.push_back(' ');
                } else {
                    close();
                }
            }
            ++line;
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (open) code.push_back(' ');
            ++i;
            continue;
        }
        if (!python && (c == '{' || c == '}') && depth == 0) {
            close();
            ++i;
            continue;
        }
        if (c == ';' && depth == 0) {
            close();
            ++i;
            continue;
        }
        start_if_needed(i);
        if (c == '"' || c == '\'' || c == '`') {
            const bool triple = python && text.substr(i, 3) == std::string(3, c);
            const std::size_t qlen = triple ? 3 : 1;
            const std::size_t from = i;
            i += qlen;
            while (i < text.size()) {
                if (text[i] == '\\' && c != '`') {
                    i += 2;
                    continue;
                }
                if (text.substr(i, qlen) == std::string(qlen, c)) {
                    i += qlen;
                    break;
                }
                if (text[i] == '\n') ++line;
                ++i;
            }
            i = std::min(i, text.size());
            code.append(text.substr(from, i - from));
            last_sig = i;
            last_sig_line = line;
            continue;
        }
        if (c == '(' || c == '[' || (python && c == '{')) ++depth;
        if (c == ')' || c == ']' || (python && c == '}')) depth = std::max(0, depth - 1);
        code.push_back(c);
        ++i;
        last_sig = i;
        last_sig_line = line;
    }
    close();
    return out;
}

}  // namespace ivrepro::parser
