#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ivrepro::parser {

enum class Language { Stata, R, Python };

std::string_view to_string(Language lang) noexcept;
std::optional<Language> language_from_string(std::string_view s) noexcept;
/// .do/.ado -> Stata, .R/.r -> R, .py -> Python.
std::optional<Language> language_for_path(const std::filesystem::path& path);

struct SourceScript {
    std::string path;  // relative to the package root, '/' separated
    Language language = Language::Stata;
    std::string text;
};

/// Reads a script, replacing invalid UTF-8 sequences with U+FFFD.
SourceScript load_script(const std::filesystem::path& file, const std::filesystem::path& package_root);
std::string sanitize_utf8(std::string_view bytes);

enum class DelimiterMode { Newline, Semicolon };

/// One Stata statement with comments stripped and continuations joined.
struct StataCommand {
    std::string verb;                   // canonical verb after prefixes, lower case
    std::vector<std::string> prefixes;  // capture / quietly / by ...: / bootstrap ...:
    std::string text;                   // full statement, single-spaced, comments removed
    std::string body;                   // statement from the verb onward
    std::size_t begin = 0;              // byte span [begin, end) in the script, terminator included
    std::size_t end = 0;
    int first_line = 0;  // 1-based
    int last_line = 0;
    DelimiterMode mode = DelimiterMode::Newline;
    bool suspect = false;  // unterminated at end of file
    std::vector<std::string> unresolved_macros;

    [[nodiscard]] bool has_prefix(std::string_view p) const;
};

struct Segment {
    enum class Kind { Command, Directive, Trivia };
    Kind kind = Kind::Trivia;
    std::size_t begin = 0;
    std::size_t end = 0;
    int first_line = 0;
    int last_line = 0;
    DelimiterMode mode = DelimiterMode::Newline;  // mode in force when the segment starts
};

/// Partition of a Stata script: concatenating every segment span reproduces
/// the input byte for byte.
struct StataSegmentation {
    std::vector<Segment> segments;
    std::vector<StataCommand> commands;
};

StataSegmentation segment_stata(std::string_view text);
/// Commands only. Requires a Stata script.
std::vector<StataCommand> segment_commands(const SourceScript& script);

/// Matches #d, #de, ..., #delimit followed by ";" or "cr".
std::optional<DelimiterMode> parse_delimit_directive(std::string_view line);

/// Splits prefixes (capture, quietly, by ...:, bootstrap ...:) from a statement.
void split_prefixes(std::string_view statement, std::vector<std::string>& prefixes, std::string& body);
std::string canonical_verb(std::string_view word);
bool is_wrapper_prefix(std::string_view prefix);

/// Global and local macro definitions in force at a point in a script.
struct MacroTable {
    std::map<std::string, std::string> globals;
    std::map<std::string, std::string> locals;
};

/// Records a `global`/`local` definition into the table; false if `cmd` is not one.
bool record_macro_definition(const StataCommand& cmd, MacroTable& table);

/// Substitutes `$name`, `${name}` and `` `name' `` in one string.
std::string substitute_macros(std::string_view text, const MacroTable& table, std::vector<std::string>* unresolved);

/// Walks commands in order, recording definitions and substituting references.
/// Undefined references stay literal and are listed in `unresolved_macros`.
std::vector<StataCommand> expand_macros(std::vector<StataCommand> commands, MacroTable table);

/// Split on top-level whitespace, keeping parentheses, brackets and quotes intact.
std::vector<std::string> split_top_level(std::string_view s);
/// Index of the first top-level occurrence of `ch`, or npos.
std::size_t find_top_level(std::string_view s, char ch, std::size_t from = 0);
std::string trim_copy(std::string_view s);
std::string to_lower(std::string_view s);
std::string collapse_spaces(std::string_view s);

}  // namespace ivrepro::parser
