#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "wqdil/qd_loop.hpp"

namespace wqdil {

/// Everything the command-line driver reads from a config file.
struct HarnessConfig {
  qd::QdConfig qd;
  int pool_size = 50;
  int num_demos = 4;
  /// Demonstration CSV for learned-reward runs.
  std::string demos;
};

/// Flat "key = value" lines; '#' starts a comment. Unknown keys and bad
/// values throw std::runtime_error with the line number. Keys not present
/// keep their current value in `config`.
void parse_config(std::istream& is, HarnessConfig& config);
HarnessConfig load_config(const std::filesystem::path& path);

/// Writes every key with its current value, in a form parse_config accepts.
void write_config(std::ostream& os, const HarnessConfig& config);

}  // namespace wqdil
