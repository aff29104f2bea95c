#pragma once

// Content hashes used as artifact ids. Identical bytes always map to the same
// id, which makes re-running a deterministic job idempotent.

#include <openssl/evp.h>

#include <array>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "vegmap/error.hpp"

namespace vegmap {

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  require(EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) == 1,
          ErrorCode::io_error, "SHA-256 digest failed");
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

/// `<prefix>-<first 12 hex digits of sha256(content)>`.
inline std::string content_id(std::string_view prefix, std::string_view content) {
  return fmt::format("{}-{}", prefix, sha256_hex(content).substr(0, 12));
}

}  // namespace vegmap
