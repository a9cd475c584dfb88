#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace ivrepro::acquire {

struct StudyInfo {
    std::string title;
    std::string authors;
    std::string year;
    std::string journal;
    std::string replication_url;
};

nlohmann::json to_json(const StudyInfo& info);
StudyInfo study_info_from_json(const nlohmann::json& j);

/// Pulls metadata and the replication URL out of pre-extracted paper text.
/// Fields that cannot be found are left empty and named in `missing`.
/// Throws NoRepositoryUrl when the document contains no repository link,
/// unless require_url is false (package supplied by hand).
StudyInfo extract_study_info(std::string_view paper_text, std::vector<std::string>* missing = nullptr, bool require_url = true);

enum class RepositoryKind { Dataverse, GitHub, OSF, Http };

std::string_view to_string(RepositoryKind kind) noexcept;

struct RepositoryRef {
    RepositoryKind kind = RepositoryKind::Http;
    std::string identifier;
    std::string host;  // Dataverse installation; empty means the Harvard default

    [[nodiscard]] std::string canonical_url() const;
    bool operator==(const RepositoryRef&) const = default;
};

RepositoryRef classify_repository(std::string_view url);

struct HttpResponse {
    int status = 0;
    std::string body;
    std::map<std::string, std::string> headers;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse get(const std::string& url) = 0;
};

/// Plain HTTP(S) GET with redirect following.
std::unique_ptr<HttpTransport> make_http_transport(int timeout_seconds = 120);

struct ManifestEntry {
    std::string path;  // relative to the package root, '/' separated
    std::uintmax_t size = 0;
    std::string sha256;
};

struct PackageManifest {
    std::vector<ManifestEntry> entries;
    RepositoryRef source;
    std::string retrieved_at;
    std::string version;  // dataset version when the platform reports one
};

nlohmann::json to_json(const PackageManifest& m);
PackageManifest manifest_from_json(const nlohmann::json& j);

/// Downloads every file of the package into dest, expanding zip archives.
/// Throws RetrievalFailed carrying the HTTP status.
PackageManifest fetch_package(const RepositoryRef& ref, const std::filesystem::path& dest, HttpTransport& transport,
                              int parallel = 4);

/// Manifest of an existing directory (manually supplied packages).
PackageManifest scan_package(const std::filesystem::path& dir, const RepositoryRef& source);

/// Paths whose size or hash no longer match. Missing files are listed too.
std::vector<std::string> verify_manifest(const PackageManifest& m, const std::filesystem::path& dir);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& file);

/// Expands a zip archive held in memory. Entries escaping dest are rejected.
/// Returns the written paths relative to dest.
std::vector<std::string> extract_zip(std::string_view archive, const std::filesystem::path& dest);

/// UTC timestamp in ISO 8601 with second precision.
std::string utc_now();

}  // namespace ivrepro::acquire
