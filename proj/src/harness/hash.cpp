#include "cma/harness/hash.hpp"

#include <openssl/sha.h>

#include <fmt/format.h>

namespace cma {

std::string Sha256Hex(std::string_view bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char c : digest) out += fmt::format("{:02x}", c);
  return out;
}

}  // namespace cma
