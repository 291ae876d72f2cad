#pragma once

// Flat binary tensor container for fusion parameter bundles.
//
// Layout (all integers little-endian):
//   "DFTC"              4-byte magic
//   u32 version         currently 1
//   u32 count           number of tensors
//   count times:
//     u32 name_len, name bytes (UTF-8, no terminator)
//     u32 rows, u32 cols
//     rows*cols f64     row-major, IEEE-754 little-endian

#include <filesystem>
#include <string>
#include <vector>

#include "dialoforge/fusion.hpp"

namespace dialoforge::fusion {

struct NamedTensor {
  std::string name;
  Matrix value;
};

inline constexpr std::uint32_t kTensorFormatVersion = 1;

std::string encode_tensors(const std::vector<NamedTensor>& tensors);
/// Throws ParseError (line = byte offset) on truncation, bad magic or version.
std::vector<NamedTensor> decode_tensors(const std::string& bytes);

std::vector<NamedTensor> model_tensors(const Model& model);
/// Rebuilds a model from tensors named as in param_views(); shapes come from the file.
Model model_from_tensors(const std::vector<NamedTensor>& tensors);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace dialoforge::fusion
