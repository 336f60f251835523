// Named-matrix persistence.
//
// Format "plat-tensors", version 1, a single JSON object:
//   {
//     "format": "plat-tensors",
//     "version": 1,
//     "tensors": [ {"name": "...", "rows": R, "cols": C, "data": [R*C doubles]} ]
//   }
// "data" is row-major. Doubles are written with round-trip precision, so a
// save/load cycle reproduces every value bit for bit.

#ifndef PLAT_TENSOR_IO_HPP
#define PLAT_TENSOR_IO_HPP

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "plat/numerics.hpp"

namespace plat {

inline constexpr const char* kTensorFormat = "plat-tensors";
inline constexpr int kTensorFormatVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Matrix>>;

std::string tensors_to_json(const NamedTensors& tensors);
NamedTensors tensors_from_json(const std::string& text);

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::filesystem::path& path);

}  // namespace plat

#endif  // PLAT_TENSOR_IO_HPP
