#include "tempdir.hpp"

#include "ivrepro/acquire/acquisition.hpp"
#include "ivrepro/error.hpp"

#include <doctest.h>
#include <zlib.h>

#include <mutex>
#include <set>

using namespace ivrepro;
using namespace ivrepro::acquire;
using testfx::TempDir;

namespace {

class MockTransport final : public HttpTransport {
public:
    std::map<std::string, HttpResponse> routes;
    std::vector<std::string> requested;

    HttpResponse get(const std::string& url) override {
        std::lock_guard lock(mu_);
        requested.push_back(url);
        const auto it = routes.find(url);
        if (it == routes.end()) return {404, "not found", {}};
        return it->second;
    }

private:
    std::mutex mu_;
};

void put16(std::string& s, unsigned v) {
    s += static_cast<char>(v & 0xff);
    s += static_cast<char>((v >> 8) & 0xff);
}

void put32(std::string& s, unsigned long v) {
    put16(s, v & 0xffff);
    put16(s, (v >> 16) & 0xffff);
}

std::string raw_deflate(const std::string& in) {
    z_stream zs{};
    deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY);
    std::string out(deflateBound(&zs, static_cast<uLong>(in.size())), '\0');
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    deflate(&zs, Z_FINISH);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    return out;
}

// Minimal zip writer: entries ending in '/' are directories; odd entries are stored, even ones deflated.
std::string make_zip(const std::vector<std::pair<std::string, std::string>>& files) {
    std::string body, central;
    int k = 0;
    for (const auto& [name, data] : files) {
        const bool dir = name.back() == '/';
        const bool deflated = !dir && k++ % 2 == 0;
        const std::string payload = deflated ? raw_deflate(data) : data;
        const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size()));
        const auto offset = body.size();
        put32(body, 0x04034b50);
        put16(body, 20);
        put16(body, 0);
        put16(body, deflated ? 8 : 0);
        put32(body, 0);
        put32(body, crc);
        put32(body, payload.size());
        put32(body, data.size());
        put16(body, name.size());
        put16(body, 0);
        body += name + payload;

        put32(central, 0x02014b50);
        put16(central, 20);
        put16(central, 20);
        put16(central, 0);
        put16(central, deflated ? 8 : 0);
        put32(central, 0);
        put32(central, crc);
        put32(central, payload.size());
        put32(central, data.size());
        put16(central, name.size());
        put16(central, 0);
        put16(central, 0);
        put16(central, 0);
        put16(central, 0);
        put32(central, 0);
        put32(central, offset);
        central += name;
    }
    std::string out = body + central;
    put32(out, 0x06054b50);
    put16(out, 0);
    put16(out, 0);
    put16(out, files.size());
    put16(out, files.size());
    put32(out, central.size());
    put32(out, body.size());
    put16(out, 0);
    return out;
}

}  // namespace

TEST_CASE("study info: Dataverse DOI in the availability statement") {
    const std::string text =
        "Small Aggregates, Big Manipulation: Vote Buying Enforcement and Collective Monitoring\n"
        "Miguel R. Rueda\n"
        "American Journal of Political Science, 2017\n"
        "\n"
        "Abstract. Vote buying is common in Colombia (see https://www.registraduria.gov.co).\n"
        "\n"
        "## Replication Materials\n"
        "Replication files are available at the AJPS Dataverse: doi:10.7910/DVN/ABCDEF.\n";
    std::vector<std::string> missing;
    const auto info = extract_study_info(text, &missing);
    CHECK(info.replication_url == "https://doi.org/10.7910/DVN/ABCDEF");
    CHECK(info.title == "Small Aggregates, Big Manipulation: Vote Buying Enforcement and Collective Monitoring");
    CHECK(info.authors == "Miguel R. Rueda");
    CHECK(info.year == "2017");
    CHECK(info.journal == "American Journal of Political Science");
    CHECK(missing.empty());

    const auto ref = classify_repository(info.replication_url);
    CHECK(ref.kind == RepositoryKind::Dataverse);
    CHECK(ref.identifier == "10.7910/DVN/ABCDEF");
}

TEST_CASE("study info: availability section beats an earlier repository link") {
    const std::string text =
        "Title: Turnout and Rain\n"
        "Authors: A. Author\n"
        "\n"
        "We build on code from https://github.com/someone/tools.\n"
        "\n"
        "Data Availability Statement\n"
        "All data are at https://osf.io/ab12c/ and at https://example.org/mirror.\n"
        "# References\n"
        "https://github.com/another/repo\n";
    std::vector<std::string> missing;
    const auto info = extract_study_info(text, &missing);
    CHECK(info.replication_url == "https://osf.io/ab12c/");
    CHECK(info.title == "Turnout and Rain");
    CHECK(info.authors == "A. Author");
    CHECK(missing == std::vector<std::string>{"year", "journal"});
}

TEST_CASE("study info: no link") {
    const std::string text = "A Paper\nSomeone Else\n\nNo data here.\n";
    try {
        (void)extract_study_info(text);
        FAIL("expected NoRepositoryUrl");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoRepositoryUrl);
    }
    const auto info = extract_study_info(text, nullptr, false);
    CHECK(info.replication_url.empty());
    CHECK(info.title == "A Paper");
    CHECK(info.authors == "Someone Else");
}

TEST_CASE("study info JSON round trip") {
    const StudyInfo s{"T", "A and B", "2020", "J", "https://github.com/a/b"};
    const auto back = study_info_from_json(to_json(s));
    CHECK(back.title == s.title);
    CHECK(back.authors == s.authors);
    CHECK(back.replication_url == s.replication_url);
    CHECK_THROWS_AS(study_info_from_json(nlohmann::json{{"title", "x"}}), Error);
}

TEST_CASE("repository classification") {
    struct Case {
        const char* url;
        RepositoryKind kind;
        const char* id;
        const char* host;
    };
    const Case cases[] = {
        {"https://doi.org/10.7910/dvn/abcdef", RepositoryKind::Dataverse, "10.7910/DVN/ABCDEF", ""},
        {"doi.org/10.7910/DVN/XYZ", RepositoryKind::Dataverse, "10.7910/DVN/XYZ", ""},
        {"https://dataverse.harvard.edu/dataset.xhtml?persistentId=doi:10.7910/DVN/QWE", RepositoryKind::Dataverse,
         "10.7910/DVN/QWE", ""},
        {"https://dataverse.nl/dataset.xhtml?persistentId=doi%3A10.34894/AB12", RepositoryKind::Dataverse, "10.34894/AB12",
         "dataverse.nl"},
        {"https://github.com/owner/repo.git", RepositoryKind::GitHub, "owner/repo", ""},
        {"https://github.com/owner/repo/tree/main/code", RepositoryKind::GitHub, "owner/repo", ""},
        {"https://osf.io/AB12C/", RepositoryKind::OSF, "ab12c", ""},
        {"https://doi.org/10.17605/OSF.IO/AB12C", RepositoryKind::OSF, "ab12c", ""},
        {"https://example.org/files/pkg.zip", RepositoryKind::Http, "https://example.org/files/pkg.zip", ""},
        {"https://doi.org/10.1017/S0003055400000001", RepositoryKind::Http, "https://doi.org/10.1017/S0003055400000001", ""},
    };
    for (const auto& c : cases) {
        CAPTURE(c.url);
        const auto ref = classify_repository(c.url);
        CHECK(ref.kind == c.kind);
        CHECK(ref.identifier == c.id);
        CHECK(ref.host == c.host);
        // the canonical form classifies back to the same reference
        CHECK(classify_repository(ref.canonical_url()) == ref);
    }
}

TEST_CASE("zip extraction: stored and deflated entries, nested folders") {
    TempDir t("zip");
    const std::string big(5000, 'x');
    const auto zip = make_zip({{"top/", ""}, {"top/a.do", "display 1\n"}, {"top/data/b.csv", "x,y\n1,2\n"}, {"top/c.txt", big}});
    const auto names = extract_zip(zip, t.path());
    CHECK(names == std::vector<std::string>{"top/a.do", "top/data/b.csv", "top/c.txt"});
    CHECK(testfx::read_file(t / "top/a.do") == "display 1\n");
    CHECK(testfx::read_file(t / "top/data/b.csv") == "x,y\n1,2\n");
    CHECK(testfx::read_file(t / "top/c.txt") == big);
}

TEST_CASE("zip extraction rejects unsafe entries and corruption") {
    TempDir t("zipbad");
    CHECK_THROWS_AS(extract_zip(make_zip({{"../evil.txt", "x"}}), t.path()), Error);
    CHECK_THROWS_AS(extract_zip(make_zip({{"/abs.txt", "x"}}), t.path()), Error);
    CHECK_THROWS_AS(extract_zip("not a zip at all, definitely not", t.path()), Error);
    auto zip = make_zip({{"a.txt", "first"}, {"b.txt", "hello world"}});  // b.txt is stored
    zip[zip.find("hello world")] = 'H';
    try {
        extract_zip(zip, t.path());
        FAIL("expected CRC failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RetrievalFailed);
        CHECK(std::string(e.what()).find("CRC") != std::string::npos);
    }
}

TEST_CASE("sha256 known answers") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("fetch from Dataverse through the access API") {
    TempDir t("dv");
    MockTransport m;
    const std::string base = "https://dataverse.harvard.edu";
    m.routes[base + "/api/datasets/:persistentId/?persistentId=doi:10.7910/DVN/ABCDEF"] = {
        200,
        R"({"status":"OK","data":{"latestVersion":{"versionNumber":2,"versionMinorNumber":1,"files":[
            {"directoryLabel":"code","dataFile":{"id":11,"filename":"main.do"}},
            {"dataFile":{"id":12,"filename":"data.tab"}}]}}})",
        {}};
    m.routes[base + "/api/access/datafile/11"] = {200, "ivreg2 y (d = z)\n", {}};
    m.routes[base + "/api/access/datafile/12"] = {200, "y\td\tz\n1\t2\t3\n", {}};

    const auto manifest = fetch_package(classify_repository("https://doi.org/10.7910/DVN/ABCDEF"), t.path(), m, 2);
    REQUIRE(manifest.entries.size() == 2);
    CHECK(manifest.entries[0].path == "code/main.do");
    CHECK(manifest.entries[1].path == "data.tab");
    CHECK(manifest.entries[1].sha256 == sha256_hex("y\td\tz\n1\t2\t3\n"));
    CHECK(manifest.version == "2.1");
    CHECK(manifest.source.kind == RepositoryKind::Dataverse);
    CHECK(testfx::read_file(t / "code/main.do") == "ivreg2 y (d = z)\n");
    CHECK(verify_manifest(manifest, t.path()).empty());
}

TEST_CASE("fetch from GitHub strips the archive's top folder") {
    TempDir t("gh");
    MockTransport m;
    m.routes["https://github.com/owner/repo/archive/HEAD.zip"] = {
        200, make_zip({{"repo-main/", ""}, {"repo-main/README.md", "# r\n"}, {"repo-main/code/a/b.R", "library(fixest)\n"}}), {}};
    const auto manifest = fetch_package(classify_repository("https://github.com/owner/repo"), t.path(), m);
    std::vector<std::string> paths;
    for (const auto& e : manifest.entries) paths.push_back(e.path);
    CHECK(paths == std::vector<std::string>{"README.md", "code/a/b.R"});
    CHECK(testfx::read_file(t / "code/a/b.R") == "library(fixest)\n");
    CHECK_FALSE(std::filesystem::exists(t / ".staging"));
}

TEST_CASE("fetch from OSF walks folders and pages") {
    TempDir t("osf");
    MockTransport m;
    const std::string root = "https://api.osf.io/v2/nodes/ab12c/files/osfstorage/";
    m.routes[root] = {200, R"({"data":[
        {"attributes":{"name":"code","kind":"folder"},
         "relationships":{"files":{"links":{"related":{"href":"https://api.osf.io/v2/nodes/ab12c/files/osfstorage/code/"}}}}}],
        "links":{"next":"https://api.osf.io/v2/nodes/ab12c/files/osfstorage/?page=2"}})", {}};
    m.routes[root + "?page=2"] = {200, R"({"data":[
        {"attributes":{"name":"d.csv","kind":"file"},"links":{"download":"https://osf.io/download/d1/"}}],
        "links":{"next":null}})", {}};
    m.routes[root + "code/"] = {200, R"({"data":[
        {"attributes":{"name":"run.py","kind":"file"},"links":{"download":"https://osf.io/download/r1/"}}],"links":{}})", {}};
    m.routes["https://osf.io/download/d1/"] = {200, "a,b\n", {}};
    m.routes["https://osf.io/download/r1/"] = {200, "print(1)\n", {}};
    const auto manifest = fetch_package(classify_repository("https://osf.io/ab12c/"), t.path(), m);
    REQUIRE(manifest.entries.size() == 2);
    CHECK(manifest.entries[0].path == "code/run.py");
    CHECK(manifest.entries[1].path == "d.csv");
}

TEST_CASE("fetch failure carries the HTTP status and the manual hint") {
    TempDir t("404");
    MockTransport m;
    try {
        fetch_package(classify_repository("https://github.com/owner/missing"), t.path(), m);
        FAIL("expected RetrievalFailed");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RetrievalFailed);
        const std::string msg = e.what();
        CHECK(msg.find("HTTP 404") != std::string::npos);
        CHECK(msg.find("--package-dir") != std::string::npos);
    }
}

TEST_CASE("Dataverse listings with unsafe names are refused") {
    TempDir t("dvbad");
    MockTransport m;
    m.routes["https://dataverse.harvard.edu/api/datasets/:persistentId/?persistentId=doi:10.7910/DVN/BAD"] = {
        200, R"({"data":{"latestVersion":{"files":[{"directoryLabel":"../..","dataFile":{"id":1,"filename":"x"}}]}}})", {}};
    CHECK_THROWS_AS(fetch_package(classify_repository("https://doi.org/10.7910/DVN/BAD"), t.path(), m), Error);
}

TEST_CASE("manifest verification notices a flipped byte and a missing file") {
    TempDir t("man");
    testfx::write_file(t / "pkg/a.do", "reg y x\n");
    testfx::write_file(t / "pkg/sub/b.csv", "1,2\n");
    const auto m = scan_package(t / "pkg", {RepositoryKind::Http, "manual", ""});
    CHECK(verify_manifest(m, t / "pkg").empty());

    const auto back = manifest_from_json(to_json(m));
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[1].sha256 == m.entries[1].sha256);
    CHECK(back.source == m.source);

    testfx::write_file(t / "pkg/a.do", "reg y z\n");
    CHECK(verify_manifest(m, t / "pkg") == std::vector<std::string>{"a.do"});
    std::filesystem::remove(t / "pkg/sub/b.csv");
    CHECK(verify_manifest(m, t / "pkg") == std::vector<std::string>{"a.do", "sub/b.csv"});
}
