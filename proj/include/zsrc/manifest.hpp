#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "json.hpp"

namespace zsrc {

// Hex-encoded SHA-256 of raw bytes / of a file's contents.
std::string sha256_string(const std::string& data);
std::string sha256_file(const std::string& path);

// Record of one CLI run: everything needed to reproduce the artifacts plus
// content hashes to detect drift. Written atomically next to the primary
// artifact.
struct RunManifest {
    std::string subcommand;
    std::string version;
    nlohmann::json config;  // effective config after all overrides
    std::uint64_t seed = 0;
    std::map<std::string, std::string> inputs;   // path -> content hash
    std::map<std::string, std::string> outputs;  // path -> content hash
    double duration_seconds = 0.0;
};

// <artifact>.manifest.json
std::string manifest_path(const std::string& artifact_path);

void save_manifest(const RunManifest& m, const std::string& path);
RunManifest load_manifest(const std::string& path);

}  // namespace zsrc
