#include "ivrepro/acquire/acquisition.hpp"

#include "ivrepro/error.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <regex>
#include <thread>

namespace ivrepro::acquire {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManualHint = "; download the package by hand and rerun with --package-dir";

class HttplibTransport final : public HttpTransport {
public:
    explicit HttplibTransport(int timeout) : timeout_(timeout) {}

    HttpResponse get(const std::string& url) override {
        static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(url, m, re)) return {0, "malformed URL " + url, {}};
        httplib::Client cli(m[1].str());
        cli.set_follow_location(true);
        cli.set_connection_timeout(timeout_);
        cli.set_read_timeout(timeout_);
        const std::string path = m[2].matched ? m[2].str() : "/";
        auto res = cli.Get(path);
        if (!res) return {0, httplib::to_string(res.error()), {}};
        HttpResponse out{res->status, std::move(res->body), {}};
        for (const auto& [k, v] : res->headers) out.headers[k] = v;
        return out;
    }

private:
    int timeout_;
};

HttpResponse checked_get(HttpTransport& t, const std::string& url) {
    auto r = t.get(url);
    if (r.status != 200) {
        fail(ErrorCode::RetrievalFailed, "HTTP " + std::to_string(r.status) + " for " + url + kManualHint);
    }
    return r;
}

// Relative path from a repository listing; refuses anything that could leave dest.
std::string safe_relative(std::string dir, const std::string& name) {
    while (!dir.empty() && dir.back() == '/') dir.pop_back();
    while (!dir.empty() && dir.front() == '/') dir.erase(0, 1);
    std::string rel = dir.empty() ? name : dir + "/" + name;
    const fs::path p(rel);
    if (rel.empty() || p.is_absolute() || rel.find('\\') != std::string::npos) fail(ErrorCode::RetrievalFailed, "unsafe file name in listing: " + rel);
    for (const auto& part : p)
        if (part == "..") fail(ErrorCode::RetrievalFailed, "unsafe file name in listing: " + rel);
    return rel;
}

void write_bytes(const fs::path& target, const std::string& bytes) {
    fs::create_directories(target.parent_path());
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    if (!(out << bytes)) fail(ErrorCode::IoError, "cannot write " + target.string());
}

struct Download {
    std::string url;
    std::string path;
};

void download_all(const std::vector<Download>& items, const fs::path& dest, HttpTransport& t, int parallel) {
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        while (true) {
            const auto i = next.fetch_add(1);
            if (i >= items.size()) return;
            {
                std::lock_guard lock(err_mu);
                if (first_error) return;
            }
            try {
                write_bytes(dest / items[i].path, checked_get(t, items[i].url).body);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    const auto n = static_cast<std::size_t>(std::max(1, parallel));
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < std::min(n, items.size()); ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

bool looks_like_zip(std::string_view body) { return body.size() >= 4 && body.substr(0, 4) == std::string_view("PK\x03\x04", 4); }

// Expands an archive whose entries share one top-level folder (GitHub style) without that folder.
void expand_stripped(const std::string& zip, const fs::path& dest) {
    const auto staging = dest / ".staging";
    fs::remove_all(staging);
    const auto names = extract_zip(zip, staging);
    std::string top;
    bool single = !names.empty();
    for (const auto& n : names) {
        const auto slash = n.find('/');
        const std::string first = slash == std::string::npos ? "" : n.substr(0, slash);
        if (first.empty() || (!top.empty() && first != top)) {
            single = false;
            break;
        }
        top = first;
    }
    const fs::path from = single ? staging / top : staging;
    for (const auto& entry : fs::directory_iterator(from)) fs::rename(entry.path(), dest / entry.path().filename());
    fs::remove_all(staging);
}

std::string dataverse_base(const RepositoryRef& ref) {
    return "https://" + (ref.host.empty() ? std::string("dataverse.harvard.edu") : ref.host);
}

PackageManifest fetch_dataverse(const RepositoryRef& ref, const fs::path& dest, HttpTransport& t, int parallel) {
    const auto base = dataverse_base(ref);
    const auto listing = checked_get(t, base + "/api/datasets/:persistentId/?persistentId=doi:" + ref.identifier);
    PackageManifest m;
    std::vector<Download> items;
    try {
        const auto j = json::parse(listing.body);
        const auto& v = j.at("data").at("latestVersion");
        if (v.contains("versionNumber")) {
            m.version = std::to_string(v["versionNumber"].get<long long>()) + "." + std::to_string(v.value("versionMinorNumber", 0LL));
        }
        for (const auto& f : v.at("files")) {
            const auto& df = f.at("dataFile");
            const auto id = df.at("id").get<long long>();
            const auto name = df.value("filename", df.value("label", std::to_string(id)));
            items.push_back({base + "/api/access/datafile/" + std::to_string(id), safe_relative(f.value("directoryLabel", ""), name)});
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::RetrievalFailed, std::string("unexpected Dataverse listing: ") + e.what() + kManualHint);
    }
    download_all(items, dest, t, parallel);
    return m;
}

void osf_walk(HttpTransport& t, const std::string& url, const std::string& dir, std::vector<Download>& items, int depth) {
    if (depth > 32) fail(ErrorCode::RetrievalFailed, "OSF folder tree too deep");
    std::string next = url;
    while (!next.empty()) {
        const auto page = checked_get(t, next);
        try {
            const auto j = json::parse(page.body);
            for (const auto& item : j.at("data")) {
                const auto& a = item.at("attributes");
                const auto name = a.at("name").get<std::string>();
                if (a.value("kind", "") == "folder") {
                    const auto sub = item.at("relationships").at("files").at("links").at("related").at("href").get<std::string>();
                    osf_walk(t, sub, dir.empty() ? name : dir + "/" + name, items, depth + 1);
                } else {
                    items.push_back({item.at("links").at("download").get<std::string>(), safe_relative(dir, name)});
                }
            }
            const auto& links = j.value("links", json::object());
            next = links.contains("next") && links["next"].is_string() ? links["next"].get<std::string>() : "";
        } catch (const json::exception& e) {
            fail(ErrorCode::RetrievalFailed, std::string("unexpected OSF listing: ") + e.what() + kManualHint);
        }
    }
}

std::string file_name_of(const std::string& url) {
    auto path = url.substr(0, url.find_first_of("?#"));
    const auto slash = path.find_last_of('/');
    auto name = slash == std::string::npos ? path : path.substr(slash + 1);
    return name.empty() ? "download" : name;
}

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(int timeout_seconds) { return std::make_unique<HttplibTransport>(timeout_seconds); }

PackageManifest fetch_package(const RepositoryRef& ref, const fs::path& dest, HttpTransport& t, int parallel) {
    std::error_code ec;
    fs::create_directories(dest, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + dest.string());
    PackageManifest m;
    switch (ref.kind) {
        case RepositoryKind::Dataverse: m = fetch_dataverse(ref, dest, t, parallel); break;
        case RepositoryKind::GitHub: {
            const auto zip = checked_get(t, "https://github.com/" + ref.identifier + "/archive/HEAD.zip");
            expand_stripped(zip.body, dest);
            break;
        }
        case RepositoryKind::OSF: {
            std::vector<Download> items;
            osf_walk(t, "https://api.osf.io/v2/nodes/" + ref.identifier + "/files/osfstorage/", "", items, 0);
            download_all(items, dest, t, parallel);
            break;
        }
        case RepositoryKind::Http: {
            const auto r = checked_get(t, ref.identifier);
            if (looks_like_zip(r.body)) {
                expand_stripped(r.body, dest);
            } else {
                write_bytes(dest / safe_relative("", file_name_of(ref.identifier)), r.body);
            }
            break;
        }
    }
    auto scanned = scan_package(dest, ref);
    scanned.version = m.version;
    return scanned;
}

PackageManifest scan_package(const fs::path& dir, const RepositoryRef& source) {
    if (!fs::is_directory(dir)) fail(ErrorCode::IoError, "package directory not found: " + dir.string());
    PackageManifest m;
    m.source = source;
    m.retrieved_at = utc_now();
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), dir).generic_string();
        m.entries.push_back({rel, e.file_size(), sha256_file(e.path())});
    }
    std::sort(m.entries.begin(), m.entries.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    return m;
}

std::vector<std::string> verify_manifest(const PackageManifest& m, const fs::path& dir) {
    std::vector<std::string> bad;
    for (const auto& e : m.entries) {
        const auto p = dir / e.path;
        std::error_code ec;
        if (!fs::is_regular_file(p, ec) || fs::file_size(p, ec) != e.size || sha256_file(p) != e.sha256) bad.push_back(e.path);
    }
    return bad;
}

json to_json(const PackageManifest& m) {
    json entries = json::array();
    for (const auto& e : m.entries) entries.push_back({{"path", e.path}, {"size", e.size}, {"sha256", e.sha256}});
    return {{"source", {{"kind", std::string(to_string(m.source.kind))}, {"identifier", m.source.identifier}, {"host", m.source.host}}},
            {"retrieved_at", m.retrieved_at},
            {"version", m.version},
            {"entries", entries}};
}

PackageManifest manifest_from_json(const json& j) {
    try {
        PackageManifest m;
        const auto kind = j.at("source").at("kind").get<std::string>();
        if (kind == "dataverse") {
            m.source.kind = RepositoryKind::Dataverse;
        } else if (kind == "github") {
            m.source.kind = RepositoryKind::GitHub;
        } else if (kind == "osf") {
            m.source.kind = RepositoryKind::OSF;
        } else {
            m.source.kind = RepositoryKind::Http;
        }
        m.source.identifier = j["source"].value("identifier", "");
        m.source.host = j["source"].value("host", "");
        m.retrieved_at = j.value("retrieved_at", "");
        m.version = j.value("version", "");
        for (const auto& e : j.at("entries")) {
            m.entries.push_back({e.at("path").get<std::string>(), e.at("size").get<std::uintmax_t>(), e.at("sha256").get<std::string>()});
        }
        return m;
    } catch (const json::exception& e) {
        fail(ErrorCode::ValidationError, std::string("malformed manifest: ") + e.what());
    }
}

}  // namespace ivrepro::acquire
