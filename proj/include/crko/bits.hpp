#pragma once

// Fixed-width bit strings, keyed mixing and the error types shared by every
// module. Bit strings of up to 64 bits are held in a std::uint64_t; the
// most significant of the `width` low bits is the first symbol of the string.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace crko {

/// Raised on malformed inputs: bad widths, bad indices, bad configs.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an internal invariant (write-once tables, witness soundness,
/// budget accounting) is violated. Always a bug or a corrupted fixture.
class InvariantBreach : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when an exhaustive operation would enumerate more than 2^cap points.
class CapExceeded : public std::runtime_error {
 public:
  CapExceeded(const std::string& what, unsigned bits, unsigned cap)
      : std::runtime_error(what + ": needs 2^" + std::to_string(bits) +
                           " points, cap is 2^" + std::to_string(cap)),
        bits_(bits),
        cap_(cap) {}
  unsigned bits() const noexcept { return bits_; }
  unsigned cap() const noexcept { return cap_; }

 private:
  unsigned bits_;
  unsigned cap_;
};

constexpr std::uint64_t mask(unsigned width) noexcept {
  return width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
}

constexpr bool fits(std::uint64_t value, unsigned width) noexcept {
  return (value & ~mask(width)) == 0;
}

/// A bit string with an explicit length.
struct Bits {
  std::uint64_t value = 0;
  unsigned width = 0;

  friend bool operator==(const Bits&, const Bits&) = default;
};

inline Bits make_bits(std::uint64_t value, unsigned width) {
  if (width > 64) throw ConfigError("bit string wider than 64 bits");
  if (!fits(value, width))
    throw ConfigError("value does not fit in " + std::to_string(width) + " bits");
  return {value, width};
}

/// Parses a string of '0'/'1' symbols, first symbol most significant.
inline Bits parse_bitstring(std::string_view s) {
  if (s.size() > 64) throw ConfigError("bit string longer than 64 symbols");
  std::uint64_t v = 0;
  for (char c : s) {
    if (c != '0' && c != '1') throw ConfigError("bad bit symbol in '" + std::string(s) + "'");
    v = (v << 1) | static_cast<std::uint64_t>(c == '1');
  }
  return {v, static_cast<unsigned>(s.size())};
}

inline std::string to_bitstring(Bits b) {
  std::string out(b.width, '0');
  for (unsigned k = 0; k < b.width; ++k)
    if ((b.value >> (b.width - 1 - k)) & 1U) out[k] = '1';
  return out;
}

inline std::string to_hex(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  if (v == 0) return "0";
  std::string out;
  while (v != 0) {
    out.insert(out.begin(), digits[v & 0xF]);
    v >>= 4;
  }
  return out;
}

inline std::uint64_t parse_hex(std::string_view s) {
  if (s.starts_with("0x") || s.starts_with("0X")) s.remove_prefix(2);
  if (s.empty() || s.size() > 16) throw ConfigError("bad hex value '" + std::string(s) + "'");
  std::uint64_t v = 0;
  for (char c : s) {
    unsigned d;
    if (c >= '0' && c <= '9') d = static_cast<unsigned>(c - '0');
    else if (c >= 'a' && c <= 'f') d = static_cast<unsigned>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') d = static_cast<unsigned>(c - 'A' + 10);
    else throw ConfigError("bad hex digit in '" + std::string(s) + "'");
    v = (v << 4) | d;
  }
  return v;
}

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Keyed pseudorandom word for (key, a, b). Every lazily sampled value in the
/// library is one of these, so a (seed, point) pair fully determines it.
constexpr std::uint64_t keyed(std::uint64_t key, std::uint64_t a, std::uint64_t b = 0) noexcept {
  return mix64(mix64(mix64(key) ^ a) ^ (b * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

/// Domain-separation tags for keyed streams.
enum class Stream : std::uint64_t {
  oracle = 0x4f52434c,      // H truth table
  function = 0x46554e43,    // ideal F
  randomness = 0x52414e44,  // public randomness R
  coins = 0x434f494e,       // distinguisher / adversary coins
  trial = 0x5452494c,       // per-trial seed fan-out
  prf = 0x50524621,         // prf_gated subverter key schedule
};

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream tag, std::uint64_t a,
                                    std::uint64_t b = 0) noexcept {
  return keyed(master ^ static_cast<std::uint64_t>(tag), a, b);
}

/// Sequential generator over the keyed stream; cheap to copy.
class KeyedRng {
 public:
  using result_type = std::uint64_t;
  explicit KeyedRng(std::uint64_t seed) noexcept : seed_(seed) {}
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  result_type operator()() noexcept { return keyed(seed_, counter_++); }
  std::uint64_t bits(unsigned width) noexcept { return (*this)() & mask(width); }
  /// Uniform in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t v;
    do v = (*this)(); while (v >= limit);
    return v % bound;
  }
  double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace crko
