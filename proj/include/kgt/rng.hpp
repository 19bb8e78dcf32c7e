#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace kgt {

// Stateless 64-bit mixer, used to derive independent sub-stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// mt19937_64 engine with hand-rolled draw helpers. std::*_distribution output
// is implementation-defined, which would break seeded reproducibility, so all
// derivations from the raw 64-bit stream live here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased uniform index in [0, n) by rejection.
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index: n must be positive");
    const std::uint64_t un = n;
    const std::uint64_t threshold = (0 - un) % un;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return static_cast<std::size_t>(r % un);
    }
  }

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  // k distinct indexes from [0, n), returned ascending (Floyd's sampling).
  std::vector<std::size_t> sample_indexes(std::size_t n, std::size_t k) {
    if (k > n) throw std::invalid_argument("Rng::sample_indexes: k exceeds n");
    std::vector<std::size_t> picked;
    picked.reserve(k);
    for (std::size_t j = n - k; j < n; ++j) {
      const std::size_t t = index(j + 1);
      if (std::find(picked.begin(), picked.end(), t) != picked.end()) {
        picked.push_back(j);
      } else {
        picked.push_back(t);
      }
    }
    std::sort(picked.begin(), picked.end());
    return picked;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace kgt
