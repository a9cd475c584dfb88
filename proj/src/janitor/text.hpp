#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ivrepro::janitor::detail {

// 1-based line lookup over a fixed text.
class LineIndex {
public:
    explicit LineIndex(std::string_view text);

    [[nodiscard]] int line_of(std::size_t pos) const;
    [[nodiscard]] std::size_t begin_of(int line) const;
    // end of the line's content, before "\n" (or "\r\n")
    [[nodiscard]] std::size_t content_end_of(int line) const;
    [[nodiscard]] std::size_t after(int line) const;  // first byte of the next line
    [[nodiscard]] int count() const { return static_cast<int>(starts_.size()); }

private:
    std::string_view text_;
    std::vector<std::size_t> starts_;
};

struct Edit {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string replacement;
};

// Edits must not overlap.
std::string apply_edits(std::string_view text, std::vector<Edit> edits);

// Prefixes every line of [begin, end) with `mark`, after its indentation.
std::string comment_lines(std::string_view block, std::string_view mark);

std::string leading_space(std::string_view line);

bool is_absolute_path(std::string_view s);

// Shortest package-relative form of an absolute path: the longest suffix that
// names a package file, else the file name.
std::string relativize(std::string_view path, const std::vector<std::string>& package_files);

std::size_t count_lines(std::string_view s);

}  // namespace ivrepro::janitor::detail
