#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dialoforge::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Shared word normalizer used by WER and every text metric: lowercase,
/// drop ASCII punctuation, split on whitespace.
std::vector<std::string> normalize_words(std::string_view s);

bool contains_word(std::string_view haystack, std::string_view word);

}  // namespace dialoforge::text
