#pragma once

#include <cstdint>
#include <string>

namespace ecp {

// FIPS 180-4 SHA-256; hex digest helpers for the output-manifest files.
std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file_hex(const std::string& path);

}  // namespace ecp
