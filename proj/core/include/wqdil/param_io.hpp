#pragma once

#include <cstdint>
#include <iosfwd>

#include "wqdil/mlp.hpp"

namespace wqdil::nn {

inline constexpr std::uint32_t kParamMagic = 0x56505157;  // "WQPV"

/// FNV-1a over the layer widths.
std::uint64_t widths_hash(const MlpSpec& spec);

/// 16-byte header (magic u32, layer count u32, widths hash u64) followed by
/// `values.size()` little-endian float32 values. `values` may be longer than
/// spec.param_count() to carry extra trailing entries such as log_std.
void write_params(std::ostream& os, const MlpSpec& spec, std::span<const double> values);

/// Reads a vector written by `write_params` for the same spec. `count` is the
/// number of stored floats. Throws std::runtime_error on a header mismatch or
/// truncated stream.
ParamVector read_params(std::istream& is, const MlpSpec& spec, std::size_t count);

}  // namespace wqdil::nn
