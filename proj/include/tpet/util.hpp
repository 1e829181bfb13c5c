#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace tpet::util {

// Seed mixing for derived random streams.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic draws on top of mt19937_64. <random> distributions are
// implementation-defined, so anything that ends up in a log must not use them.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(splitmix64(seed)) {}

  uint64_t next() { return eng_(); }

  // [0, n)
  int uniform_int(int n) {
    return n <= 1 ? 0 : static_cast<int>(eng_() % static_cast<uint64_t>(n));
  }

  // [0, 1)
  double uniform01() { return (eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double exponential(double rate);

  bool chance(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 eng_;
};

// Fixed-precision float formatting (printf-stable, locale-free).
std::string fmt_double(double v, int precision = 2);

// Shortest round-trip representation, used wherever text must reparse exactly.
std::string fmt_shortest(double v);

void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace tpet::util
