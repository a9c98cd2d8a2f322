#include "manifest.hpp"

#include "qiv/error.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace qiv::cli {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw io_error("DigestFailed", "SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("FileNotReadable", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw io_error("FileNotReadable", "read failed for " + path);
    return ss.str();
}

std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(epoch, &end, 10);
        if (end != epoch && *end == '\0') t = static_cast<std::time_t>(v);
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

void write_atomically(const fs::path& target, const std::string& content) {
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("FileNotWritable", "cannot create " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw io_error("FileNotWritable", "write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw io_error("FileNotWritable", "cannot rename into " + target.string());
    }
}

}  // namespace

void OutputSet::add(const std::string& name, std::string content) {
    files_.emplace_back(name, std::move(content));
}

void OutputSet::commit(Json manifest) {
    const fs::path dir(directory_);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw io_error("FileNotWritable", "cannot create output directory " + directory_);
    // A stale manifest would vouch for files about to be replaced.
    fs::remove(dir / "manifest.json", ec);

    Json inventory = Json::array();
    std::vector<fs::path> published;
    try {
        for (const auto& [name, content] : files_) {
            write_atomically(dir / name, content);
            published.push_back(dir / name);
            inventory.push_back({{"file", name},
                                 {"bytes", content.size()},
                                 {"sha256", sha256_hex(content)}});
        }
        manifest["outputs"] = std::move(inventory);
        manifest["finished_at"] = utc_timestamp();
        write_atomically(dir / "manifest.json", manifest.dump(2) + "\n");
    } catch (...) {
        for (const auto& p : published) fs::remove(p, ec);
        throw;
    }
}

}  // namespace qiv::cli
