#include "affinity/digest.hpp"

#include <openssl/evp.h>

#include <memory>
#include <stdexcept>

namespace affinity {

std::string content_digest(std::span<const std::byte> bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
    throw std::runtime_error("sha256 digest failed");

  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(kDigestAlgorithm);
  out += ':';
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 15];
  }
  return out;
}

std::string content_digest(std::string_view bytes) {
  return content_digest(std::as_bytes(std::span(bytes.data(), bytes.size())));
}

}  // namespace affinity
