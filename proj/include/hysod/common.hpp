#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hysod {

/// Invalid configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent dataset / store content (CLI exit code 3).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unrecoverable runtime failure, e.g. a non-finite loss (CLI exit code 4).
struct RuntimeAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Derives an independent RNG seed from the master seed, a scope tag, and any
/// number of integer qualifiers (iteration, epoch, ...). Stateless derivation
/// keeps every stochastic decision reproducible and resume-safe.
template <typename... Ints>
std::uint64_t seed_for(std::uint64_t master, std::string_view scope, Ints... qualifiers) {
  std::uint64_t h = splitmix64(master ^ fnv1a(scope));
  ((h = splitmix64(h ^ static_cast<std::uint64_t>(qualifiers))), ...);
  return h;
}

/// mt19937_64 with hand-rolled output transforms. The engine's output sequence
/// is pinned by the standard; std::*_distribution is not, so we avoid it.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  int uniform_int(int n) { return static_cast<int>(gen_() % static_cast<std::uint64_t>(n)); }

  /// Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t next() { return gen_(); }

  /// Fisher-Yates with explicit draws (portable determinism).
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(gen_() % i);
      std::swap(items[i - 1], items[j]);
    }
  }

private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Linear interpolation coefficients under the half-pixel-center convention.
struct LerpCoef {
  int lo = 0;
  int hi = 0;
  double w_lo = 1.0;
  double w_hi = 0.0;
};

inline LerpCoef lerp_coef(int in_size, int out_size, int i) {
  double s = (i + 0.5) * (static_cast<double>(in_size) / out_size) - 0.5;
  if (s < 0.0) s = 0.0;
  double max_s = static_cast<double>(in_size - 1);
  if (s > max_s) s = max_s;
  LerpCoef c;
  c.lo = static_cast<int>(s);
  if (c.lo > in_size - 1) c.lo = in_size - 1;
  c.hi = c.lo + 1 < in_size ? c.lo + 1 : in_size - 1;
  double f = s - c.lo;
  c.w_lo = 1.0 - f;
  c.w_hi = f;
  return c;
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace hysod
