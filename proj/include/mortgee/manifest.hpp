#pragma once

#include <string>
#include <string_view>

namespace mortgee {

/// Hex SHA-256 of a file's bytes; used to pin run manifests to their input.
std::string sha256_file(const std::string& path);

std::string sha256_bytes(std::string_view data);

}  // namespace mortgee
