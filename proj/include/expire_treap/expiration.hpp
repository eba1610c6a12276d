#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace expire_treap {

/// Expiration timestamp in integer milliseconds, or infinity for records that
/// never expire. Comparison operators implement the deterministic order:
/// finite values numerically, every finite value below infinity, and
/// infinity equal to infinity. The randomized tie-break for two infinite
/// values lives in ExtendedComparator.
class ExpirationTime {
 public:
  using rep = std::uint64_t;

  constexpr ExpirationTime() noexcept = default;

  static constexpr ExpirationTime at(rep millis) {
    if (millis == kInfinity) {
      throw std::out_of_range("finite expiration time out of range");
    }
    return ExpirationTime(millis);
  }
  static constexpr ExpirationTime infinity() noexcept { return ExpirationTime(kInfinity); }

  [[nodiscard]] constexpr bool is_infinite() const noexcept { return value_ == kInfinity; }
  [[nodiscard]] constexpr bool is_finite() const noexcept { return value_ != kInfinity; }

  /// Milliseconds; only meaningful for finite values.
  [[nodiscard]] constexpr rep millis() const noexcept { return value_; }

  /// Raw ordering key; infinity maps to the maximum representable value.
  [[nodiscard]] constexpr rep raw() const noexcept { return value_; }

  friend constexpr auto operator<=>(ExpirationTime, ExpirationTime) noexcept = default;

  [[nodiscard]] std::string to_string() const {
    return is_infinite() ? std::string("inf") : std::to_string(value_);
  }

  friend std::ostream& operator<<(std::ostream& os, ExpirationTime t) {
    return os << t.to_string();
  }

 private:
  static constexpr rep kInfinity = std::numeric_limits<rep>::max();

  constexpr explicit ExpirationTime(rep v) noexcept : value_(v) {}

  rep value_ = 0;
};

/// Extended "less than" on expiration times: numeric on finite values,
/// finite < infinity, and a fair coin when both sides are infinite. The coin
/// keeps a treap balanced when many records never expire.
class ExtendedComparator {
 public:
  explicit ExtendedComparator(std::uint64_t seed = 0x5eed) : rng_(seed) {}

  bool less(ExpirationTime x, ExpirationTime y) {
    if (x.is_finite()) {
      return y.is_infinite() || x.millis() < y.millis();
    }
    if (y.is_finite()) {
      return false;
    }
    return coin();
  }

  /// x <= y, read as "not (y < x)".
  bool less_equal(ExpirationTime x, ExpirationTime y) { return !less(y, x); }

  void reseed(std::uint64_t seed) { rng_.seed(seed); }

 private:
  bool coin() {
    if (bits_left_ == 0) {
      bits_ = rng_();
      bits_left_ = 64;
    }
    const bool b = (bits_ & 1U) != 0;
    bits_ >>= 1U;
    --bits_left_;
    return b;
  }

  std::mt19937_64 rng_;
  std::uint64_t bits_ = 0;
  unsigned bits_left_ = 0;
};

/// Key transform applied before keys enter a treap. Identity keeps key order
/// (and range queries); Hashed applies a bijective 64-bit mixer so the tree
/// shape no longer depends on correlation between keys and expiration times.
class KeyHasher {
 public:
  enum class Mode { Identity, Hashed };

  static constexpr KeyHasher identity() noexcept { return KeyHasher(Mode::Identity, 0); }
  static constexpr KeyHasher hashed(std::uint64_t seed) noexcept { return KeyHasher(Mode::Hashed, seed); }

  [[nodiscard]] constexpr Mode mode() const noexcept { return mode_; }
  [[nodiscard]] constexpr std::uint64_t seed() const noexcept { return seed_; }

  [[nodiscard]] constexpr std::uint64_t operator()(std::uint64_t key) const noexcept {
    return mode_ == Mode::Identity ? key : mix(key ^ seed_);
  }

  /// Inverse of operator(): recovers the original key from a stored one.
  [[nodiscard]] constexpr std::uint64_t invert(std::uint64_t stored) const noexcept {
    return mode_ == Mode::Identity ? stored : unmix(stored) ^ seed_;
  }

  // SplitMix64 finalizer. Each step (xor-shift, odd multiply) is invertible.
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27U)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31U);
  }

  static constexpr std::uint64_t unmix(std::uint64_t z) noexcept {
    z = unshift(z, 31U);
    z *= 0x319642b2d24d8ec3ULL;
    z = unshift(z, 27U);
    z *= 0x96de1b173f119089ULL;
    return unshift(z, 30U);
  }

 private:
  constexpr KeyHasher(Mode m, std::uint64_t seed) noexcept : mode_(m), seed_(seed) {}

  static constexpr std::uint64_t unshift(std::uint64_t y, unsigned s) noexcept {
    std::uint64_t x = y;
    for (unsigned done = s; done < 64U; done += s) {
      x = y ^ (x >> s);
    }
    return x;
  }

  Mode mode_;
  std::uint64_t seed_;
};

}  // namespace expire_treap
