#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace facepipe {

// Flat sectioned key=value text:
//   [camera]
//   focal = 1015
// becomes {"camera.focal": "1015"}. '#' starts a comment; no nesting.
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path);

// Throws listing the first key not present in `known`.
void validate_config_keys(const std::map<std::string, std::string>& config,
                          const std::vector<std::string>& known);

// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string digest_file(const std::filesystem::path& path);

// Digest of a directory tree: hash of each regular file's relative path and
// digest, in sorted order.
std::string digest_tree(const std::filesystem::path& root);

// key=value lines, written in the given order.
void write_manifest(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& entries);

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace facepipe
