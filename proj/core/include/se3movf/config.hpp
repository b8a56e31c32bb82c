#pragma once

// Plain-text run configuration (key = value lines, [section] headers) and the
// run manifest that makes every output reproducible.

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include <json.hpp>

namespace se3movf {

// Returns a flat map with "section.key" keys. '#' starts a comment.
// Malformed lines raise ConfigError naming the line number.
std::map<std::string, std::string> parse_config(const std::string& text);
std::map<std::string, std::string> parse_config_file(const std::string& path);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

// Snapshot of everything that determines a run's outputs.
nlohmann::json make_run_manifest(const std::map<std::string, std::string>& resolved_config,
                                 std::uint64_t dataset_fingerprint);

} // namespace se3movf
