#pragma once

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace qiv::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "1.0.0";

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(const std::string& bytes);

/// Reads a whole file; throws FileNotReadable.
std::string read_file(const std::string& path);

/// UTC timestamp in ISO-8601. Honors SOURCE_DATE_EPOCH when set.
std::string utc_timestamp();

/// Collects a command's outputs in memory and publishes them with
/// temp-then-rename; the manifest goes last, so its presence means every
/// listed file is complete.
class OutputSet {
public:
    explicit OutputSet(std::string directory) : directory_(std::move(directory)) {}

    void add(const std::string& name, std::string content);
    /// Writes every file, then manifest.json listing each with its digest.
    /// On failure already-published files of this set are removed.
    void commit(Json manifest);

    const std::string& directory() const { return directory_; }

private:
    std::string directory_;
    std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace qiv::cli
