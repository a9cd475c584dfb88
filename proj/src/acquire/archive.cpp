#include "ivrepro/acquire/acquisition.hpp"

#include "ivrepro/error.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <memory>

namespace ivrepro::acquire {

namespace fs = std::filesystem;

namespace {

std::uint32_t le32(std::string_view d, std::size_t at) {
    if (at + 4 > d.size()) fail(ErrorCode::RetrievalFailed, "truncated zip archive");
    return static_cast<std::uint32_t>(static_cast<unsigned char>(d[at])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(d[at + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(d[at + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(d[at + 3])) << 24;
}

std::uint16_t le16(std::string_view d, std::size_t at) {
    if (at + 2 > d.size()) fail(ErrorCode::RetrievalFailed, "truncated zip archive");
    return static_cast<std::uint16_t>(static_cast<unsigned char>(d[at]) | static_cast<unsigned char>(d[at + 1]) << 8);
}

std::string inflate_raw(std::string_view in, std::size_t expected) {
    std::string out(expected, '\0');
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) fail(ErrorCode::RetrievalFailed, "zlib init failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    const auto produced = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || produced != expected) fail(ErrorCode::RetrievalFailed, "corrupt deflate stream in zip archive");
    return out;
}

bool unsafe_entry(const std::string& name) {
    if (name.empty() || name[0] == '/' || name.find('\\') != std::string::npos || name.find(':') != std::string::npos) return true;
    for (const auto& part : fs::path(name)) {
        if (part == "..") return true;
    }
    return false;
}

std::string to_hex(const unsigned char* md, unsigned int len) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

}  // namespace

std::vector<std::string> extract_zip(std::string_view d, const fs::path& dest) {
    // end of central directory: scan back over a possible comment
    if (d.size() < 22) fail(ErrorCode::RetrievalFailed, "not a zip archive");
    std::size_t eocd = std::string_view::npos;
    const std::size_t stop = d.size() > 22 + 65535 ? d.size() - 22 - 65535 : 0;
    for (std::size_t i = d.size() - 22 + 1; i-- > stop;) {
        if (le32(d, i) == 0x06054b50) {
            eocd = i;
            break;
        }
    }
    if (eocd == std::string_view::npos) fail(ErrorCode::RetrievalFailed, "zip central directory not found");
    const std::size_t entries = le16(d, eocd + 10);
    std::size_t p = le32(d, eocd + 16);
    if (entries == 0xFFFF || p == 0xFFFFFFFF) fail(ErrorCode::RetrievalFailed, "zip64 archives are not supported");

    std::vector<std::string> written;
    for (std::size_t e = 0; e < entries; ++e) {
        if (le32(d, p) != 0x02014b50) fail(ErrorCode::RetrievalFailed, "bad zip central directory entry");
        const auto method = le16(d, p + 10);
        const auto crc = le32(d, p + 16);
        const std::size_t csize = le32(d, p + 20);
        const std::size_t usize = le32(d, p + 24);
        const std::size_t name_len = le16(d, p + 28);
        const std::size_t extra_len = le16(d, p + 30);
        const std::size_t comment_len = le16(d, p + 32);
        const std::size_t local = le32(d, p + 42);
        if (p + 46 + name_len > d.size()) fail(ErrorCode::RetrievalFailed, "truncated zip archive");
        std::string name(d.substr(p + 46, name_len));
        p += 46 + name_len + extra_len + comment_len;

        if (unsafe_entry(name)) fail(ErrorCode::RetrievalFailed, "zip entry escapes the destination: " + name);
        const fs::path target = dest / name;
        if (name.back() == '/') {
            fs::create_directories(target);
            continue;
        }
        if (le32(d, local) != 0x04034b50) fail(ErrorCode::RetrievalFailed, "bad zip local header for " + name);
        const std::size_t data = local + 30 + le16(d, local + 26) + le16(d, local + 28);
        if (data + csize > d.size()) fail(ErrorCode::RetrievalFailed, "truncated zip entry " + name);
        const auto raw = d.substr(data, csize);
        std::string bytes;
        if (method == 0) {
            bytes = std::string(raw);
        } else if (method == 8) {
            bytes = inflate_raw(raw, usize);
        } else {
            fail(ErrorCode::RetrievalFailed, "unsupported zip compression method " + std::to_string(method) + " for " + name);
        }
        const auto actual = crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
        if (actual != crc) fail(ErrorCode::RetrievalFailed, "CRC mismatch in zip entry " + name);
        fs::create_directories(target.parent_path());
        std::ofstream out(target, std::ios::binary | std::ios::trunc);
        if (!(out << bytes)) fail(ErrorCode::IoError, "cannot write " + target.string());
        written.push_back(name);
    }
    return written;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) fail(ErrorCode::IoError, "sha256 failed");
    return to_hex(md, len);
}

std::string sha256_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read " + file.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    return to_hex(md, len);
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace ivrepro::acquire
