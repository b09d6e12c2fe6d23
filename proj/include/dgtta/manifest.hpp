#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dgtta/kvdoc.hpp"

namespace dgtta {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestFile = "manifest.txt";

/// Provenance record written as manifest.txt into every artifact directory.
struct RunManifest {
  std::string command_line;
  std::string tool_version = kToolVersion;
  std::vector<std::pair<std::string, std::string>> seeds;
  std::vector<std::pair<std::string, std::string>> checkpoint_hashes;
  std::vector<std::pair<std::string, double>> timings_s;
  KeyValueDocument config_snapshot;

  /// Appends [run], [seeds], [checkpoints], [timings] and config.* sections.
  void append_to(KeyValueDocument& doc) const;
  /// Writes dir/manifest.txt holding this manifest plus `extra` sections.
  void write(const std::filesystem::path& dir, const KeyValueDocument& extra = {}) const;
};

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& text);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace dgtta
