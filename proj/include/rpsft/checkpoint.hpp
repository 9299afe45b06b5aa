#pragma once

#include "rpsft/matrix.hpp"
#include "rpsft/model.hpp"
#include "rpsft/protected_subspace.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rpsft {

/// Binary tensor container:
///   "RPSV", u32 version = 1, u32 tensor_count,
///   per tensor: u16 name_len, name bytes, u64 rows, u64 cols, rows*cols f64 row-major.
/// Integers and floats are little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Tensors in file order.
using NamedTensors = std::vector<std::pair<std::string, DenseMatrix>>;

/// Throws ParameterError on empty, overlong or duplicate names.
std::vector<std::uint8_t> encode_checkpoint(const NamedTensors& tensors);
/// Throws FormatError with the byte offset on bad magic or version, truncation,
/// zero dimensions, duplicate names, non-finite payloads or trailing bytes.
NamedTensors decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Throws IoError when the file cannot be written or read.
void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

NamedTensors to_tensors(const ModelParams& model);
NamedTensors to_tensors(const BasisSet& bases);
/// Architecture is inferred from the tensor names.
ModelParams model_from_tensors(const NamedTensors& tensors);
/// Expects "{layer}.Uk", "{layer}.Vk" and "{layer}.Sref" for every layer.
BasisSet bases_from_tensors(const NamedTensors& tensors);

} // namespace rpsft
