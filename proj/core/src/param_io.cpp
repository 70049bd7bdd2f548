#include "wqdil/param_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace wqdil::nn {

namespace {

template <typename T>
void put_le(std::ostream& os, T value) {
  std::array<char, sizeof(T)> bytes;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  }
  os.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes{};
  is.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!is) throw std::runtime_error("read_params: truncated stream");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

std::uint64_t widths_hash(const MlpSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (int w : spec.widths()) {
    for (int i = 0; i < 4; ++i) {
      h ^= static_cast<std::uint64_t>((static_cast<std::uint32_t>(w) >> (8 * i)) & 0xff);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

void write_params(std::ostream& os, const MlpSpec& spec, std::span<const double> values) {
  put_le<std::uint32_t>(os, kParamMagic);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(spec.layer_count()));
  put_le<std::uint64_t>(os, widths_hash(spec));
  for (double v : values) {
    put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
}

ParamVector read_params(std::istream& is, const MlpSpec& spec, std::size_t count) {
  if (get_le<std::uint32_t>(is) != kParamMagic) {
    throw std::runtime_error("read_params: bad magic");
  }
  if (get_le<std::uint32_t>(is) != static_cast<std::uint32_t>(spec.layer_count())) {
    throw std::runtime_error("read_params: layer count mismatch");
  }
  if (get_le<std::uint64_t>(is) != widths_hash(spec)) {
    throw std::runtime_error("read_params: layer widths mismatch");
  }
  ParamVector values(count);
  for (auto& v : values) v = std::bit_cast<float>(get_le<std::uint32_t>(is));
  return values;
}

}  // namespace wqdil::nn
