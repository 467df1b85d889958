#include "zsrc/manifest.hpp"

#include <openssl/evp.h>

#include "zsrc/errors.hpp"
#include "zsrc/io_util.hpp"

namespace zsrc {

std::string sha256_string(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr))
        throw ComputeError("sha256 digest failed");
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string sha256_file(const std::string& path) { return sha256_string(read_file(path)); }

std::string manifest_path(const std::string& artifact_path) {
    return artifact_path + ".manifest.json";
}

void save_manifest(const RunManifest& m, const std::string& path) {
    nlohmann::json j;
    j["subcommand"] = m.subcommand;
    j["version"] = m.version;
    j["config"] = m.config;
    j["seed"] = m.seed;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    j["duration_seconds"] = m.duration_seconds;
    write_file_atomic(path, j.dump(2) + "\n");
}

RunManifest load_manifest(const std::string& path) {
    const nlohmann::json j = parse_json_file(path);
    try {
        RunManifest m;
        m.subcommand = j.at("subcommand").get<std::string>();
        m.version = j.at("version").get<std::string>();
        m.config = j.at("config");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
        m.duration_seconds = j.at("duration_seconds").get<double>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": bad manifest: " + e.what());
    }
}

}  // namespace zsrc
