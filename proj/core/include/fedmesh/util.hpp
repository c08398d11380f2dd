#ifndef FEDMESH_UTIL_HPP
#define FEDMESH_UTIL_HPP

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace fedmesh {

// splitmix64 finalizer, used to decorrelate derived seeds
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable sub-seed derivation from a base seed and an ascii tag (FNV-1a over
// the tag, folded with the mixed base). Every RNG stream in a run is derived
// this way so that streams are independent and reproducible.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL ^ mix64(base);
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return mix64(h);
}

// Shortest exact decimal form: %.17g round-trips every finite double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace fedmesh

#endif
