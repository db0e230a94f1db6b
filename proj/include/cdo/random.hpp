#pragma once

// Deterministic RNG streams. Every stochastic component draws from a stream
// keyed by (top-level seed, component name, index) so results do not depend
// on execution order or thread count.

#include <cstdint>
#include <random>
#include <string_view>

namespace cdo {

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);

std::uint64_t stream_key(std::uint64_t seed, std::string_view component, std::uint64_t index);

std::mt19937_64 make_stream(std::uint64_t seed, std::string_view component, std::uint64_t index = 0);

}  // namespace cdo
