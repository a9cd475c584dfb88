#include "ivrepro/parser/iv.hpp"

#include "ivrepro/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <regex>
#include <set>
#include <tuple>

namespace ivrepro::parser {

namespace detail {
std::vector<RawIVCall> detect_stata_calls(const SourceScript& script);
std::vector<RawIVCall> detect_r_calls(const SourceScript& script);
std::vector<RawIVCall> detect_python_calls(const SourceScript& script);
}  // namespace detail

std::vector<RawIVCall> detect_iv_calls(const SourceScript& script) {
    switch (script.language) {
        case Language::Stata: return detail::detect_stata_calls(script);
        case Language::R: return detail::detect_r_calls(script);
        case Language::Python: return detail::detect_python_calls(script);
    }
    return {};
}

ExtractionResult extract_specifications(const std::vector<SourceScript>& scripts) {
    std::vector<const SourceScript*> ordered;
    for (const auto& s : scripts) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](const SourceScript* a, const SourceScript* b) { return a->path < b->path; });

    ExtractionResult out;
    for (const auto* script : ordered) {
        for (const auto& call : detect_iv_calls(*script)) {
            try {
                switch (call.language) {
                    case Language::Stata: out.specs.push_back(parse_stata_iv(call)); break;
                    case Language::R: out.specs.push_back(parse_r_iv(call)); break;
                    case Language::Python: out.specs.push_back(parse_python_iv(call)); break;
                }
            } catch (const Error& e) {
                out.failures.push_back(call.source_file + ":" + std::to_string(call.first_line) + ": " + e.what());
            }
        }
    }
    return out;
}

bool is_main_results_file(std::string_view path) {
    std::string name(path.substr(path.find_last_of('/') == std::string_view::npos ? 0 : path.find_last_of('/') + 1));
    name = to_lower(name);
    return name.find("main") != std::string::npos || name.find("table") != std::string::npos ||
           name.find("result") != std::string::npos;
}

namespace {

std::vector<std::string> normalized_sorted(const std::vector<std::string>& v) {
    std::vector<std::string> out;
    for (const auto& t : v) out.push_back(normalize_term(t));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

using DedupKey = std::tuple<std::string, std::string, std::vector<std::string>, std::vector<std::string>>;

DedupKey dedup_key(const IVSpecification& s) {
    return {normalize_term(s.outcome), normalize_term(s.treatment), normalized_sorted(s.instruments), normalized_sorted(s.controls)};
}

}  // namespace

std::vector<IVSpecification> select_primary_specs(const std::vector<IVSpecification>& specs, std::size_t limit) {
    if (specs.empty()) fail(ErrorCode::NoSpecificationsFound, "no IV specifications detected");
    std::vector<std::size_t> order(specs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto rank = [&](std::size_t i) {
        const auto& s = specs[i];
        // negated so that ascending order puts the preferred spec first
        return std::make_tuple(-static_cast<int>(s.table_ref.has_value()), -static_cast<int>(is_main_results_file(s.source_file)),
                               -static_cast<long>(s.controls.size()), s.source_file, s.line, i);
    };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rank(a) < rank(b); });

    std::vector<IVSpecification> out;
    std::set<DedupKey> seen;
    for (std::size_t i : order) {
        if (!seen.insert(dedup_key(specs[i])).second) continue;
        if (out.size() < limit) out.push_back(specs[i]);
    }
    return out;
}

namespace {

std::optional<double> parse_number(const std::string& s) {
    if (s.empty() || s == ".") return std::nullopt;
    std::string t;
    for (char c : s) {
        if (c != ',') t.push_back(c);
    }
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() || *end != '\0') return std::nullopt;
    return v;
}

struct TableColumns {
    std::size_t coef = 0;
    std::size_t se = 1;
};

// Merges stacked header lines by character position and finds the coefficient
// and standard error columns among the labels to the right of '|'.
TableColumns header_columns(const std::vector<std::string>& header_lines) {
    struct Span {
        std::size_t begin, end;
        std::string label;
    };
    std::vector<Span> spans;
    for (const auto& line : header_lines) {
        const auto bar = line.find('|');
        if (bar == std::string::npos) continue;
        std::size_t i = bar + 1;
        while (i < line.size()) {
            while (i < line.size() && line[i] == ' ') ++i;
            if (i >= line.size()) break;
            std::size_t j = i;
            // labels such as "Std. Err." contain a single inner space
            while (j < line.size() && !(line[j] == ' ' && (j + 1 >= line.size() || line[j + 1] == ' '))) ++j;
            Span s{i, j, line.substr(i, j - i)};
            bool merged = false;
            for (auto& existing : spans) {
                if (s.begin < existing.end && existing.begin < s.end) {
                    existing.label += " " + s.label;
                    existing.begin = std::min(existing.begin, s.begin);
                    existing.end = std::max(existing.end, s.end);
                    merged = true;
                    break;
                }
            }
            if (!merged) spans.push_back(s);
            i = j;
        }
    }
    std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.begin < b.begin; });
    TableColumns cols;
    for (std::size_t k = 0; k < spans.size(); ++k) {
        const std::string l = to_lower(spans[k].label);
        if (l.find("coef") != std::string::npos) cols.coef = k;
        if (l.find("std") != std::string::npos || l.find("err") != std::string::npos) cols.se = k;
    }
    return cols;
}

bool is_rule(const std::string& line) {
    const std::string t = trim_copy(line);
    return !t.empty() && t.find_first_not_of("-+") == std::string::npos && t.find("---") != std::string::npos;
}

bool label_matches(const std::string& label, const std::string& var) {
    if (label == var) return true;
    const auto tilde = label.find('~');
    if (tilde == std::string::npos) return false;
    const std::string head = label.substr(0, tilde);
    const std::string tail = label.substr(tilde + 1);
    return var.size() > label.size() - 1 && var.rfind(head, 0) == 0 && var.compare(var.size() - tail.size(), tail.size(), tail) == 0;
}

std::vector<std::string> numbers_after_bar(const std::string& line) {
    const auto bar = line.find('|');
    std::vector<std::string> out;
    if (bar == std::string::npos) return out;
    for (auto& tok : split_top_level(std::string_view(line).substr(bar + 1))) out.push_back(tok);
    return out;
}

}  // namespace

std::vector<ExtractedEstimate> parse_marked_log(std::string_view log_text) {
    static const std::regex marker(R"(^##REPRO_MARKER spec=(\d+) coef=(\S+) se=(\S+) N=(\S+)##$)");
    static const std::regex var_marker(R"(^##REPRO_MARKER spec=(\d+) var=(\S+)##$)");
    static const std::regex nobs(R"(Number of obs\s*=\s*([0-9,]+))");

    std::vector<std::string> lines;
    {
        std::size_t start = 0;
        while (start <= log_text.size()) {
            auto nl = log_text.find('\n', start);
            if (nl == std::string_view::npos) nl = log_text.size();
            std::string l(log_text.substr(start, nl - start));
            if (!l.empty() && l.back() == '\r') l.pop_back();
            lines.push_back(std::move(l));
            start = nl + 1;
        }
    }

    std::vector<ExtractedEstimate> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string t = trim_copy(lines[i]);
        std::smatch m;
        if (std::regex_match(t, m, marker)) {
            ExtractedEstimate e;
            e.spec_index = std::stoi(m[1].str());
            const auto coef = parse_number(m[2].str());
            if (!coef) continue;
            e.coefficient = *coef;
            e.standard_error = parse_number(m[3].str());
            if (e.standard_error && *e.standard_error < 0) e.standard_error.reset();
            if (auto n = parse_number(m[4].str())) e.n_obs = static_cast<long long>(*n);
            out.push_back(e);
        } else if (std::regex_match(t, m, var_marker)) {
            const int spec = std::stoi(m[1].str());
            const std::string var = m[2].str();
            std::optional<long long> n_obs;
            // the table follows: top rule, header lines, separator, rows
            std::size_t j = i + 1;
            std::vector<std::string> header;
            bool in_header = false;
            for (; j < lines.size(); ++j) {
                const std::string tj = trim_copy(lines[j]);
                if (std::regex_match(tj, var_marker) || std::regex_match(tj, marker)) break;
                std::smatch nm;
                if (std::regex_search(lines[j], nm, nobs)) n_obs = static_cast<long long>(*parse_number(nm[1].str()));
                if (is_rule(lines[j]) && lines[j].find('+') == std::string::npos) {
                    in_header = true;
                    header.clear();
                    continue;
                }
                if (in_header && is_rule(lines[j])) break;
                if (in_header) header.push_back(lines[j]);
            }
            const TableColumns cols = header_columns(header);
            for (++j; j < lines.size(); ++j) {
                const auto bar = lines[j].find('|');
                if (bar == std::string::npos || is_rule(lines[j])) {
                    if (trim_copy(lines[j]).empty() || is_rule(lines[j])) continue;
                    break;
                }
                const std::string label = trim_copy(std::string_view(lines[j]).substr(0, bar));
                if (!label_matches(label, var)) continue;
                auto nums = numbers_after_bar(lines[j]);
                // label alone on its row: numbers sit on the next physical row
                if (nums.empty() && j + 1 < lines.size()) nums = numbers_after_bar(lines[j + 1]);
                if (nums.size() <= std::max(cols.coef, cols.se)) break;
                const auto coef = parse_number(nums[cols.coef]);
                if (!coef) break;
                ExtractedEstimate e;
                e.spec_index = spec;
                e.coefficient = *coef;
                e.standard_error = parse_number(nums[cols.se]);
                e.n_obs = n_obs;
                out.push_back(e);
                break;
            }
        }
    }
    if (out.empty()) fail(ErrorCode::MarkerNotFound, "no estimate markers in log");
    return out;
}

}  // namespace ivrepro::parser
