#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace nzpath {

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double value);

/// FNV-1a 64-bit hash, used for config content fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

/// Current time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace nzpath
