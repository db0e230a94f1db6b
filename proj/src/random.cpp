#include "cdo/random.hpp"

namespace cdo {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t stream_key(std::uint64_t seed, std::string_view component, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ fnv1a(component)) + index);
}

std::mt19937_64 make_stream(std::uint64_t seed, std::string_view component, std::uint64_t index) {
  return std::mt19937_64(stream_key(seed, component, index));
}

}  // namespace cdo
