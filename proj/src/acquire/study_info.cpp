#include "ivrepro/acquire/acquisition.hpp"

#include "ivrepro/error.hpp"

#include <algorithm>
#include <regex>

namespace ivrepro::acquire {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Markdown decoration and numbering in front of a heading.
std::string strip_heading(std::string_view line) {
    std::string s = trim(line);
    std::size_t i = 0;
    while (i < s.size() && (s[i] == '#' || s[i] == '*' || s[i] == '_' || s[i] == ' ' || s[i] == '.' || std::isdigit(static_cast<unsigned char>(s[i]))))
        ++i;
    s = s.substr(i);
    while (!s.empty() && (s.back() == '*' || s.back() == '_' || s.back() == ':')) s.pop_back();
    return trim(s);
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        lines.emplace_back(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return lines;
}

struct Found {
    std::size_t offset;
    std::string url;
};

std::string clean_url(std::string u) {
    while (!u.empty() && std::string_view(".,;:)]}>'\"").find(u.back()) != std::string_view::npos) {
        // keep a closing paren that belongs to the URL
        if (u.back() == ')' && std::count(u.begin(), u.end(), '(') >= std::count(u.begin(), u.end(), ')')) break;
        u.pop_back();
    }
    return u;
}

std::vector<Found> find_urls(std::string_view text) {
    static const std::regex url_re(R"((https?://[^\s<>"'\]\[{}|\\^`]+)|(?:doi:\s*|\b)(10\.\d{4,9}/[^\s<>"'\]\[{}|\\^`]+))",
                                   std::regex::icase);
    std::vector<Found> out;
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), url_re); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        std::string u = m[1].matched ? m[1].str() : "https://doi.org/" + m[2].str();
        if (!m[1].matched) {
            // a DOI inside an already matched doi.org URL
            const auto pos = static_cast<std::size_t>(m.position(0));
            if (pos >= 1 && s[pos - 1] == '/') continue;
        }
        out.push_back({static_cast<std::size_t>(m.position(0)), clean_url(std::move(u))});
    }
    return out;
}

bool repository_like(const std::string& url) {
    static const char* hosts[] = {"dataverse", "doi.org/10.7910", "github.com", "osf.io", "zenodo.org", "icpsr.umich.edu",
                                  "figshare", "datadryad.org", "codeocean.com", "doi.org/10.17605", "doi.org/10.5281", "doi.org/10.3886"};
    const auto l = lower(url);
    return std::any_of(std::begin(hosts), std::end(hosts), [&](const char* h) { return l.find(h) != std::string::npos; });
}

// Offset range of the first availability section, by heading-like line.
std::optional<std::pair<std::size_t, std::size_t>> availability_section(const std::vector<std::string>& lines) {
    static const char* headings[] = {"data availability", "replication", "supporting information"};
    std::size_t offset = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto h = lower(strip_heading(lines[i]));
        const bool hit = std::any_of(std::begin(headings), std::end(headings), [&](const char* p) { return h.rfind(p, 0) == 0; });
        if (hit) {
            std::size_t end = offset + lines[i].size() + 1;
            for (std::size_t j = i + 1; j < lines.size(); ++j) {
                const auto t = trim(lines[j]);
                if (!t.empty() && t[0] == '#') break;
                end += lines[j].size() + 1;
                if (end - offset > 4000) break;
            }
            return std::make_pair(offset, end);
        }
        offset += lines[i].size() + 1;
    }
    return std::nullopt;
}

std::optional<std::string> labelled(const std::vector<std::string>& lines, std::initializer_list<const char*> labels) {
    for (const auto& line : lines) {
        const auto t = strip_heading(line);
        const auto l = lower(t);
        for (const char* lab : labels) {
            const std::string p = std::string(lab) + ":";
            if (l.rfind(p, 0) == 0) {
                auto v = trim(std::string_view(t).substr(p.size()));
                if (!v.empty()) return v;
            }
        }
    }
    return std::nullopt;
}

}  // namespace

json to_json(const StudyInfo& s) {
    return {{"title", s.title}, {"authors", s.authors}, {"year", s.year}, {"journal", s.journal}, {"replication_url", s.replication_url}};
}

StudyInfo study_info_from_json(const json& j) {
    try {
        return {j.at("title").get<std::string>(), j.at("authors").get<std::string>(), j.at("year").get<std::string>(),
                j.at("journal").get<std::string>(), j.at("replication_url").get<std::string>()};
    } catch (const json::exception& e) {
        fail(ErrorCode::ValidationError, std::string("malformed study info: ") + e.what());
    }
}

StudyInfo extract_study_info(std::string_view text, std::vector<std::string>* missing, bool require_url) {
    const auto lines = split_lines(text);
    StudyInfo info;

    const auto urls = find_urls(text);
    if (const auto sec = availability_section(lines)) {
        std::optional<std::string> any;
        for (const auto& u : urls) {
            if (u.offset < sec->first || u.offset >= sec->second) continue;
            if (repository_like(u.url)) {
                info.replication_url = u.url;
                break;
            }
            if (!any) any = u.url;
        }
        if (info.replication_url.empty() && any) info.replication_url = *any;
    }
    if (info.replication_url.empty()) {
        for (const auto& u : urls) {
            if (repository_like(u.url)) {
                info.replication_url = u.url;
                break;
            }
        }
    }
    if (info.replication_url.empty() && require_url) fail(ErrorCode::NoRepositoryUrl, "no repository URL in the paper text; supply the package manually");

    // front matter: the lines before the first blank-line gap after the title
    std::vector<std::string> front;
    for (const auto& l : lines) {
        if (front.size() >= 12) break;
        if (!trim(l).empty()) front.push_back(l);
    }

    if (auto t = labelled(lines, {"title"})) {
        info.title = *t;
    } else if (!front.empty()) {
        info.title = strip_heading(front[0]);
    }
    if (auto a = labelled(lines, {"authors", "author", "by"})) {
        info.authors = *a;
    } else if (front.size() > 1 && front[1].find("http") == std::string::npos) {
        const auto cand = strip_heading(front[1]);
        static const std::regex name_like(R"(^[A-Z][\w.'\-]+(?: [A-Z][\w.'\-]*)+(?:(?:,| and| &) [A-Z][\w.'\-]+(?: [A-Z][\w.'\-]*)+)*$)");
        if (std::regex_match(cand, name_like)) info.authors = cand;
    }
    if (auto j = labelled(lines, {"journal", "published in"})) {
        info.journal = *j;
    } else {
        static const std::regex journal_re(R"(((?:The )?(?:American|British|Quarterly|Annual|European|Comparative)?[A-Z][A-Za-z ]*(?:Journal|Review|Quarterly|Politics|Science|Studies)[A-Za-z ]*))");
        for (const auto& l : front) {
            std::smatch m;
            const auto t = strip_heading(l);
            if (t == info.title || t == info.authors) continue;
            if (std::regex_search(t, m, journal_re) && (t.find("Journal") != std::string::npos || t.find("Review") != std::string::npos)) {
                info.journal = trim(m[1].str());
                break;
            }
        }
    }
    if (auto y = labelled(lines, {"year"})) {
        info.year = *y;
    } else {
        static const std::regex year_re(R"(\b(19[5-9]\d|20\d\d)\b)");
        for (const auto& l : front) {
            std::smatch m;
            if (std::regex_search(l, m, year_re)) {
                info.year = m[1];
                break;
            }
        }
    }
    static const std::regex four_digits(R"(\d{4})");
    if (!std::regex_match(info.year, four_digits)) info.year.clear();

    if (missing) {
        missing->clear();
        if (info.title.empty()) missing->push_back("title");
        if (info.authors.empty()) missing->push_back("authors");
        if (info.year.empty()) missing->push_back("year");
        if (info.journal.empty()) missing->push_back("journal");
    }
    return info;
}

}  // namespace ivrepro::acquire
