#include "text.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

namespace ivrepro::janitor::detail {

LineIndex::LineIndex(std::string_view text) : text_(text) {
    starts_.push_back(0);
    for (std::size_t i = 0; i < text.size(); ++i)
        if (text[i] == '\n' && i + 1 < text.size()) starts_.push_back(i + 1);
}

int LineIndex::line_of(std::size_t pos) const {
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), pos);
    return static_cast<int>(it - starts_.begin());
}

std::size_t LineIndex::begin_of(int line) const { return starts_.at(static_cast<std::size_t>(line - 1)); }

std::size_t LineIndex::after(int line) const {
    return line < count() ? starts_[static_cast<std::size_t>(line)] : text_.size();
}

std::size_t LineIndex::content_end_of(int line) const {
    std::size_t e = after(line);
    if (e > begin_of(line) && text_[e - 1] == '\n') --e;
    if (e > begin_of(line) && text_[e - 1] == '\r') --e;
    return e;
}

std::string apply_edits(std::string_view text, std::vector<Edit> edits) {
    std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.begin < b.begin; });
    std::string out;
    std::size_t pos = 0;
    for (const auto& e : edits) {
        out.append(text.substr(pos, e.begin - pos));
        out += e.replacement;
        pos = e.end;
    }
    out.append(text.substr(pos));
    return out;
}

std::string leading_space(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    return std::string(line.substr(0, i));
}

std::string comment_lines(std::string_view block, std::string_view mark) {
    std::string out;
    std::size_t pos = 0;
    while (pos <= block.size()) {
        auto nl = block.find('\n', pos);
        const bool last = nl == std::string_view::npos;
        const std::string_view line = block.substr(pos, last ? std::string_view::npos : nl - pos);
        const auto indent = leading_space(line);
        out += indent;
        out += mark;
        out += line.substr(indent.size());
        if (last) break;
        out += '\n';
        pos = nl + 1;
    }
    return out;
}

bool is_absolute_path(std::string_view s) {
    if (s.size() >= 3 && std::isalpha(static_cast<unsigned char>(s[0])) && s[1] == ':' && (s[2] == '\\' || s[2] == '/')) return true;
    if (s.size() >= 2 && s[0] == '\\' && s[1] == '\\') return true;
    if (s.size() >= 2 && s[0] == '~' && s[1] == '/') return true;
    if (s.size() >= 2 && s[0] == '/' && (std::isalnum(static_cast<unsigned char>(s[1])) || s[1] == '_' || s[1] == '.')) {
        return s.find('/', 1) != std::string_view::npos;
    }
    return false;
}

std::string relativize(std::string_view path, const std::vector<std::string>& package_files) {
    std::string p(path);
    std::replace(p.begin(), p.end(), '\\', '/');
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= p.size()) {
        const auto slash = p.find('/', start);
        const auto piece = p.substr(start, slash == std::string::npos ? std::string::npos : slash - start);
        if (!piece.empty() && !(parts.empty() && piece.size() == 2 && piece[1] == ':') && piece != "~") parts.push_back(piece);
        if (slash == std::string::npos) break;
        start = slash + 1;
    }
    if (parts.empty()) return ".";
    for (std::size_t k = 0; k < parts.size(); ++k) {
        std::string suffix;
        for (std::size_t j = k; j < parts.size(); ++j) suffix += (j > k ? "/" : "") + parts[j];
        if (std::find(package_files.begin(), package_files.end(), suffix) != package_files.end()) return suffix;
    }
    return parts.back();
}

std::size_t count_lines(std::string_view s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')) + 1; }

}  // namespace ivrepro::janitor::detail
