#ifndef AFFINITY_DIGEST_HPP_
#define AFFINITY_DIGEST_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace affinity {

inline constexpr std::string_view kDigestAlgorithm = "sha256";

/// "sha256:<64 lowercase hex chars>"
std::string content_digest(std::span<const std::byte> bytes);
std::string content_digest(std::string_view bytes);

}  // namespace affinity

#endif  // AFFINITY_DIGEST_HPP_
