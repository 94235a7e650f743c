#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace docmt {

std::string hex64(std::uint64_t value);

// FNV-1a over the file's bytes; IoError when unreadable.
std::uint64_t hash_file(const std::string& path);

// Run fingerprint written next to every command's output. Holds the tool
// version, a hash of the effective config, and input/output content hashes;
// no timestamps or host data, so identical runs write identical manifests.
nlohmann::json make_manifest(const std::string& command,
                             const nlohmann::json& config,
                             const std::vector<std::string>& input_paths,
                             const std::vector<std::string>& output_paths,
                             const nlohmann::json& stats);

void write_manifest(const std::string& path, const nlohmann::json& manifest);

}  // namespace docmt
