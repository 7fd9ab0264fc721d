#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace nightseg {

std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file_hex(const std::string& path);
uint32_t crc32_of(const void* data, size_t len);

}  // namespace nightseg
