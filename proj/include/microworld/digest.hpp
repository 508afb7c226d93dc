#pragma once

#include <string>
#include <string_view>

namespace mw {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

// SHA-256 of a file's bytes. Throws mw::Error if unreadable.
std::string sha256_file(const std::string& path);

}  // namespace mw
