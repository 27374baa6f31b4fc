#pragma once

#include <string>
#include <vector>

namespace crm::digest {

// SHA-256 of the input bytes, lowercase hex.
std::string sha256_hex(const std::string& bytes);

// Session identity digest: H(uid | funit | sk) with 0x1F unit separators,
// lowercase hex.
std::string uid_digest(const std::string& uid, const std::string& funit, const std::string& sk);

// Cryptographically random bytes rendered as lowercase hex (2*n chars).
std::string random_hex(std::size_t n_bytes);

}  // namespace crm::digest
