#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace gait {

/// Seeded pseudorandom source. mt19937_64 output is mandated by the standard
/// and the derived draws below avoid std::uniform_*_distribution, whose
/// sequences differ across library implementations, so every stream is
/// reproducible across platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next() { return eng_(); }

  /// Uniform in [0, n), rejection-sampled (no modulo bias).
  long index(long n) {
    uint64_t un = static_cast<uint64_t>(n);
    uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return static_cast<long>(v % un);
  }

  /// Uniform in [0, 1) with 53-bit resolution.
  double real() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double range(double lo, double hi) { return lo + (hi - lo) * real(); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (long i = static_cast<long>(v.size()) - 1; i > 0; --i)
      std::swap(v[i], v[index(i + 1)]);
  }

  /// k distinct values from [0, n), in draw order (partial Fisher-Yates).
  std::vector<long> sample_without_replacement(long n, long k) {
    std::vector<long> pool(n);
    for (long i = 0; i < n; ++i) pool[i] = i;
    std::vector<long> out;
    out.reserve(k);
    for (long i = 0; i < k; ++i) {
      long j = i + index(n - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace gait
