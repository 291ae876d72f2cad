#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dialoforge/schema.hpp"

namespace dialoforge {

inline constexpr std::string_view kManifestExtension = ".manifest.jsonl";

/// One JSON object per line, fixed key order, UTF-8, '\n' terminated.
/// Validates every entry first; throws ValidationError naming entry id and field.
std::string serialize_manifest(const std::vector<ManifestEntry>& entries,
                               const EmotionVocabulary& vocab = {});
std::string serialize_entry(const ManifestEntry& entry);

/// Blank lines are skipped. Malformed lines throw ParseError with the 1-based
/// line number; invariant violations throw ValidationError.
std::vector<ManifestEntry> parse_manifest(std::string_view stream, const EmotionVocabulary& vocab = {});

std::vector<ManifestEntry> read_manifest_file(const std::filesystem::path& path,
                                              const EmotionVocabulary& vocab = {});
/// Writes to a sibling temp file and renames it over `path`.
void write_manifest_file(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries,
                         const EmotionVocabulary& vocab = {});

/// Reads a whole file into memory; throws Error when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
/// temp-file-then-rename write.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace dialoforge
