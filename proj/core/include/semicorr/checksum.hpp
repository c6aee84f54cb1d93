#pragma once

#include <string>
#include <string_view>

namespace semicorr {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

}  // namespace semicorr
