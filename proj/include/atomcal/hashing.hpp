#pragma once

#include <string>
#include <string_view>

namespace atomcal {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::string_view data);

bool is_hex_digest(std::string_view s);

}  // namespace atomcal
