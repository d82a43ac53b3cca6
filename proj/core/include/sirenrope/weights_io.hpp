#pragma once

// Shared weight-file format (version 1), little-endian throughout:
//
//   bytes 0-3   magic "SRPW"
//   u32         format version (1)
//   u32         metadata length L
//   L bytes     metadata, a JSON object of string -> string
//   u32         record count N
//   N records:  u32 name length, name bytes (UTF-8),
//               u32 rank, u64 extent[rank],
//               f64 value[product(extent)] in row-major order
//
// Records keep their insertion order. Metadata carries the model
// hyperparameters needed to rebuild the network that owns the records.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sirenrope/tensor.hpp"

namespace sirenrope {

inline constexpr std::uint32_t kWeightFormatVersion = 1;

struct WeightRecord {
  std::string name;
  Tensor tensor;
};

struct WeightFile {
  std::map<std::string, std::string> metadata;
  std::vector<WeightRecord> records;

  /// nullptr when absent.
  const Tensor* find(std::string_view name) const;
};

std::string encode_weights(const WeightFile& file);
WeightFile decode_weights(std::string_view bytes);

void save_weights(const std::filesystem::path& path, const WeightFile& file);
WeightFile load_weights(const std::filesystem::path& path);

}  // namespace sirenrope
