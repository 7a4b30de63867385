#pragma once

#include <string>

#include "prunekit/network.hpp"

namespace prunekit {

// single file: a text manifest (header, units, parameter directory, blob line
// with checksum) followed by the raw little-endian float payload
void save_model(const Network& net, const std::string& path);
Network load_model(const std::string& path);

std::uint32_t crc32(const unsigned char* data, std::size_t len);

} // namespace prunekit
