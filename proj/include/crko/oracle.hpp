#pragma once

// The ideal primitive H: {0,1}^{n'} -> {0,1}^{n'} viewed as the family
// h_0 : {0,1}^{3n} -> {0,1}^n and h_i : {0,1}^n -> {0,1}^{3n} (1 <= i <= ell).
// Every point stores a 3n-bit value; h_0 reads its first n bits.

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "crko/bits.hpp"

namespace crko {

inline constexpr unsigned kDefaultCap = 24;
inline constexpr unsigned kMaxN = 20;

/// Enumeration cap in bits. CRKO_CAP overrides the default of 24.
inline unsigned enumeration_cap() {
  if (const char* env = std::getenv("CRKO_CAP"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != nullptr && *end == '\0' && v > 0 && v <= 40) return static_cast<unsigned>(v);
    throw ConfigError(std::string("CRKO_CAP must be an integer in [1,40], got '") + env + "'");
  }
  return kDefaultCap;
}

inline void require_cap(unsigned bits, unsigned cap, const std::string& what) {
  if (bits > cap) throw CapExceeded(what, bits, cap);
}

constexpr unsigned ceil_log2(std::uint64_t v) noexcept {
  unsigned k = 0;
  while ((std::uint64_t{1} << k) < v) ++k;
  return k;
}

struct Params {
  unsigned n = 0;
  unsigned ell = 0;
  unsigned n_prime = 0;
  unsigned L = 0;
  std::uint64_t seed = 0;
  /// Set when ell <= n + 4; must be echoed by every output that uses these params.
  bool unsafe = false;

  unsigned wide() const noexcept { return 3 * n; }
  unsigned index_bits() const noexcept { return n_prime - 3 * n; }
  unsigned in_width(unsigned i) const noexcept { return i == 0 ? 3 * n : n; }
  unsigned out_width(unsigned i) const noexcept { return i == 0 ? n : 3 * n; }

  friend bool operator==(const Params&, const Params&) = default;
};

inline Params derive_params(unsigned n, unsigned ell, std::uint64_t seed) {
  if (n == 0) throw ConfigError("n must be at least 1");
  if (ell == 0) throw ConfigError("ell must be at least 1");
  if (n > kMaxN) throw ConfigError("n above " + std::to_string(kMaxN) + " is not supported");
  const unsigned log_l = ceil_log2(std::uint64_t{ell} + 1);
  Params p;
  p.n = n;
  p.ell = ell;
  p.n_prime = 3 * n + log_l;
  p.L = 1U << log_l;
  p.seed = seed;
  p.unsafe = ell <= n + 4;
  if (p.n_prime > 64) throw ConfigError("n' exceeds 64 bits");
  return p;
}

/// Rejects a Params whose derived fields disagree with (n, ell).
inline void validate(const Params& p) {
  const Params fresh = derive_params(p.n, p.ell, p.seed);
  if (fresh.n_prime != p.n_prime || fresh.L != p.L || fresh.unsafe != p.unsafe)
    throw ConfigError("stored n'/L/unsafe flag do not match n and ell");
}

struct OraclePoint {
  unsigned index = 0;
  std::uint64_t payload = 0;

  friend auto operator<=>(const OraclePoint&, const OraclePoint&) = default;
};

/// Flat n'-bit address: index in the high bits, 3n-bit payload in the low bits.
inline std::uint64_t flat(const Params& p, OraclePoint z) noexcept {
  return (std::uint64_t{z.index} << p.wide()) | z.payload;
}

inline OraclePoint unflat(const Params& p, std::uint64_t a) noexcept {
  return {static_cast<unsigned>(a >> p.wide()), a & mask(p.wide())};
}

/// [0,x] = (0, x) for 3n-bit x; [i,x] = (i, 0^{2n} x) for n-bit x.
inline OraclePoint embed(const Params& p, unsigned i, Bits x) {
  if (i > p.ell)
    throw ConfigError("function index " + std::to_string(i) + " exceeds ell=" + std::to_string(p.ell));
  if (x.width != p.in_width(i) || !fits(x.value, x.width))
    throw ConfigError("h_" + std::to_string(i) + " takes " + std::to_string(p.in_width(i)) +
                      "-bit inputs, got " + std::to_string(x.width));
  return {i, x.value};
}

/// Range-checked embedding for callers that carry widths implicitly.
inline OraclePoint embed(const Params& p, unsigned i, std::uint64_t x) {
  const unsigned w = i == 0 ? p.wide() : p.n;
  return embed(p, i, Bits{x, fits(x, w) ? w : 64U});
}

/// h_0 output extraction: the first n bits of the stored 3n-bit value.
inline std::uint64_t slice(const Params& p, unsigned i, std::uint64_t raw) noexcept {
  return i == 0 ? raw >> (2 * p.n) : raw;
}

/// Lazily sampled, seed-deterministic truth table for H with point overrides
/// (resampling, fixtures) and an optional materialized form. Immutable once
/// built; copies are cheap and share the materialized storage.
class OracleTable {
 public:
  OracleTable() = default;
  explicit OracleTable(Params p) : p_(std::move(p)) {}

  /// Materialized fixture: every point's raw 3n-bit value comes from `fn`.
  static OracleTable from_function(const Params& p,
                                   const std::function<std::uint64_t(OraclePoint)>& fn) {
    require_cap(p.n_prime, enumeration_cap(), "materialized table");
    OracleTable t(p);
    auto dense = std::make_shared<std::vector<std::uint64_t>>(std::size_t{1} << p.n_prime);
    for (std::uint64_t a = 0; a < dense->size(); ++a) (*dense)[a] = fn(unflat(p, a)) & mask(p.wide());
    t.dense_ = std::move(dense);
    return t;
  }

  const Params& params() const noexcept { return p_; }
  bool materialized() const noexcept { return dense_ != nullptr; }

  /// Keyed-stream value of a point, ignoring overrides and materialization.
  std::uint64_t stream_value(OraclePoint z) const noexcept {
    return keyed(derive_seed(p_.seed, Stream::oracle, 0), z.index, z.payload) & mask(p_.wide());
  }

  /// Raw 3n-bit value stored at any addressable point (index < L).
  std::uint64_t raw(OraclePoint z) const {
    if (z.index >= p_.L || !fits(z.payload, p_.wide()))
      throw ConfigError("point outside the n'-bit domain");
    if (!overrides_.empty()) {
      if (auto it = overrides_.find(flat(p_, z)); it != overrides_.end()) return it->second;
    }
    if (dense_) return (*dense_)[flat(p_, z)];
    return stream_value(z);
  }

  /// h_i(x): the first n bits for i = 0, the full 3n bits for i > 0.
  std::uint64_t query(unsigned i, Bits x) const { return slice(p_, i, raw(embed(p_, i, x))); }

  /// Same as query with the width implied by the index.
  std::uint64_t value(unsigned i, std::uint64_t x) const {
    return query(i, Bits{x, p_.in_width(i)});
  }

  /// R[z;s]H: a copy that differs from *this at z only.
  OracleTable resample(OraclePoint z, std::uint64_t s) const {
    if (!fits(s, p_.wide())) throw ConfigError("resampled value must be 3n bits");
    (void)raw(z);
    OracleTable t = *this;
    t.overrides_[flat(p_, z)] = s;
    return t;
  }

  /// Same table with every point held in memory.
  OracleTable materialize() const {
    const OracleTable& self = *this;
    return from_function(p_, [&](OraclePoint z) { return self.raw(z); });
  }

  std::size_t override_count() const noexcept { return overrides_.size(); }

  /// Binary export: 16-byte header then 2^{n'} little-endian 3n-bit records.
  void write_binary(std::ostream& out) const {
    require_cap(p_.n_prime, enumeration_cap(), "table export");
    const unsigned rec = record_bytes();
    char header[16] = {'C', 'R', 'K', 'O'};
    header[4] = static_cast<char>(kFormatVersion);
    header[5] = static_cast<char>(p_.n);
    header[6] = static_cast<char>(p_.ell & 0xFF);
    header[7] = static_cast<char>((p_.ell >> 8) & 0xFF);
    for (unsigned b = 0; b < 8; ++b) header[8 + b] = static_cast<char>((p_.seed >> (8 * b)) & 0xFF);
    out.write(header, sizeof header);
    std::vector<char> buf(rec);
    const std::uint64_t count = std::uint64_t{1} << p_.n_prime;
    for (std::uint64_t a = 0; a < count; ++a) {
      const std::uint64_t v = raw(unflat(p_, a));
      for (unsigned b = 0; b < rec; ++b) buf[b] = static_cast<char>((v >> (8 * b)) & 0xFF);
      out.write(buf.data(), rec);
    }
  }

  static OracleTable read_binary(std::istream& in) {
    unsigned char header[16];
    if (!in.read(reinterpret_cast<char*>(header), sizeof header))
      throw ConfigError("truncated table header");
    if (header[0] != 'C' || header[1] != 'R' || header[2] != 'K' || header[3] != 'O')
      throw ConfigError("bad table magic");
    if (header[4] != kFormatVersion) throw ConfigError("unsupported table version");
    std::uint64_t seed = 0;
    for (unsigned b = 0; b < 8; ++b) seed |= std::uint64_t{header[8 + b]} << (8 * b);
    const Params p = derive_params(header[5], header[6] | (unsigned{header[7]} << 8), seed);
    require_cap(p.n_prime, enumeration_cap(), "table import");
    OracleTable t(p);
    const unsigned rec = t.record_bytes();
    auto dense = std::make_shared<std::vector<std::uint64_t>>(std::size_t{1} << p.n_prime);
    std::vector<unsigned char> buf(rec);
    for (auto& v : *dense) {
      if (!in.read(reinterpret_cast<char*>(buf.data()), rec)) throw ConfigError("truncated table body");
      v = 0;
      for (unsigned b = 0; b < rec; ++b) v |= std::uint64_t{buf[b]} << (8 * b);
      if (!fits(v, p.wide())) throw ConfigError("table record exceeds 3n bits");
    }
    t.dense_ = std::move(dense);
    return t;
  }

  unsigned record_bytes() const noexcept { return (p_.wide() + 7) / 8; }

  static constexpr unsigned char kFormatVersion = 1;

 private:
  Params p_;
  std::shared_ptr<const std::vector<std::uint64_t>> dense_;
  std::map<std::uint64_t, std::uint64_t> overrides_;
};

}  // namespace crko
