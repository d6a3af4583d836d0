#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ivt {

// 64-bit FNV-1a. Stable across platforms; used for config digests and
// checkpoint trailers, not for anything security related.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

// Lowercase 16-digit hex rendering of a 64-bit digest.
std::string hex64(std::uint64_t value);

}  // namespace ivt
