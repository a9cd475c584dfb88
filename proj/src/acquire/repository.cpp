#include "ivrepro/acquire/acquisition.hpp"

#include <algorithm>
#include <regex>

namespace ivrepro::acquire {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string percent_decode(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
            std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
            out += static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16));
            i += 2;
        } else {
            out += s[i];
        }
    }
    return out;
}

struct Url {
    std::string host;   // lower case, no port
    std::string path;   // decoded, leading '/'
    std::string query;  // raw
};

std::optional<Url> parse_url(std::string_view u) {
    static const std::regex re(R"(^([A-Za-z][A-Za-z0-9+.\-]*)://([^/?#:]+)(?::\d+)?([^?#]*)(?:\?([^#]*))?(?:#.*)?$)");
    std::cmatch m;
    const std::string s(u);
    if (!std::regex_match(s.c_str(), m, re)) return std::nullopt;
    return Url{lower(m[2].str()), percent_decode(m[3].str()), m[4].str()};
}

std::vector<std::string> path_parts(const std::string& path) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos < path.size()) {
        const auto slash = path.find('/', pos);
        auto part = path.substr(pos, slash == std::string::npos ? std::string::npos : slash - pos);
        if (!part.empty()) parts.push_back(part);
        if (slash == std::string::npos) break;
        pos = slash + 1;
    }
    return parts;
}

std::optional<std::string> query_value(const std::string& query, const std::string& key) {
    std::size_t pos = 0;
    while (pos <= query.size()) {
        const auto amp = query.find('&', pos);
        const auto kv = query.substr(pos, amp == std::string::npos ? std::string::npos : amp - pos);
        const auto eq = kv.find('=');
        if (eq != std::string::npos && kv.substr(0, eq) == key) return percent_decode(kv.substr(eq + 1));
        if (amp == std::string::npos) break;
        pos = amp + 1;
    }
    return std::nullopt;
}

bool is_dataverse_doi(const std::string& doi) {
    const auto l = lower(doi);
    return l.rfind("10.7910/", 0) == 0 || l.find("/dvn/") != std::string::npos;
}

std::string upper_doi(std::string doi) {
    // DOIs are case-insensitive; Dataverse prints them upper case
    std::transform(doi.begin(), doi.end(), doi.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return doi;
}

}  // namespace

std::string_view to_string(RepositoryKind kind) noexcept {
    switch (kind) {
        case RepositoryKind::Dataverse: return "dataverse";
        case RepositoryKind::GitHub: return "github";
        case RepositoryKind::OSF: return "osf";
        case RepositoryKind::Http: return "http";
    }
    return "";
}

std::string RepositoryRef::canonical_url() const {
    switch (kind) {
        case RepositoryKind::Dataverse:
            if (host.empty()) return "https://doi.org/" + identifier;
            return "https://" + host + "/dataset.xhtml?persistentId=doi:" + identifier;
        case RepositoryKind::GitHub: return "https://github.com/" + identifier;
        case RepositoryKind::OSF: return "https://osf.io/" + identifier + "/";
        case RepositoryKind::Http: return identifier;
    }
    return identifier;
}

RepositoryRef classify_repository(std::string_view raw) {
    RepositoryRef passthrough{RepositoryKind::Http, std::string(raw), ""};
    std::string text(raw);
    // "doi.org/10.7910/..." written without a scheme
    if (text.find("://") == std::string::npos && text.find('/') != std::string::npos && text.find('.') < text.find('/')) text = "https://" + text;
    const auto url = parse_url(text);
    if (!url) return passthrough;
    const auto parts = path_parts(url->path);

    if (url->host == "doi.org" || url->host == "dx.doi.org" || url->host == "www.doi.org") {
        std::string doi = url->path.size() > 1 ? url->path.substr(1) : "";
        while (!doi.empty() && doi.back() == '/') doi.pop_back();
        if (is_dataverse_doi(doi)) return {RepositoryKind::Dataverse, upper_doi(doi), ""};
        const auto l = lower(doi);
        if (l.rfind("10.17605/osf.io/", 0) == 0) return {RepositoryKind::OSF, l.substr(16), ""};
        return passthrough;
    }
    if (url->host.find("dataverse") != std::string::npos) {
        auto pid = query_value(url->query, "persistentId");
        if (pid && lower(*pid).rfind("doi:", 0) == 0) {
            const std::string host = url->host == "dataverse.harvard.edu" ? "" : url->host;
            return {RepositoryKind::Dataverse, upper_doi(pid->substr(4)), host};
        }
        return passthrough;
    }
    if (url->host == "github.com" || url->host == "www.github.com") {
        if (parts.size() < 2) return passthrough;
        std::string repo = parts[1];
        if (repo.size() > 4 && repo.substr(repo.size() - 4) == ".git") repo.resize(repo.size() - 4);
        return {RepositoryKind::GitHub, parts[0] + "/" + repo, ""};
    }
    if (url->host == "osf.io" || url->host == "www.osf.io") {
        if (parts.empty()) return passthrough;
        static const std::regex id_re("^[a-z0-9]{5}$");
        const auto id = lower(parts[0]);
        if (!std::regex_match(id, id_re)) return passthrough;
        return {RepositoryKind::OSF, id, ""};
    }
    return passthrough;
}

}  // namespace ivrepro::acquire
