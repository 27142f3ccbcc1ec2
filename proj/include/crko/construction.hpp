#pragma once

// The corrected function C(x) = h~_0( XOR_i h~_i(x ^ r_i) ), its public
// randomness R, and two deliberately broken simpler variants kept only as
// negative controls.

#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "crko/bits.hpp"
#include "crko/oracle.hpp"
#include "crko/subversion.hpp"

namespace crko {

struct PublicRandomness {
  unsigned n = 0;
  std::vector<std::uint64_t> r;  // r[0] is r_1

  unsigned ell() const noexcept { return static_cast<unsigned>(r.size()); }
  std::uint64_t at(unsigned i) const { return r.at(i - 1); }  // 1-based

  friend bool operator==(const PublicRandomness&, const PublicRandomness&) = default;
};

inline void check_randomness(const Params& p, const PublicRandomness& R) {
  if (R.n != p.n || R.ell() != p.ell) throw ConfigError("public randomness does not match (n, ell)");
  for (auto v : R.r)
    if (!fits(v, p.n)) throw ConfigError("r_i wider than n bits");
}

inline PublicRandomness sample_R(const Params& p, std::uint64_t rng_seed) {
  PublicRandomness R{p.n, {}};
  KeyedRng rng(derive_seed(rng_seed, Stream::randomness, p.n, p.ell));
  R.r.reserve(p.ell);
  for (unsigned i = 0; i < p.ell; ++i) R.r.push_back(rng.bits(p.n));
  return R;
}

/// Binary form: "CRKR", u8 n, u16 LE ell, then ell records of ceil(n/8) LE bytes.
inline void write_binary(std::ostream& out, const PublicRandomness& R) {
  const unsigned rec = (R.n + 7) / 8;
  out.write("CRKR", 4);
  out.put(static_cast<char>(R.n));
  out.put(static_cast<char>(R.ell() & 0xFF));
  out.put(static_cast<char>((R.ell() >> 8) & 0xFF));
  for (auto v : R.r)
    for (unsigned b = 0; b < rec; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline PublicRandomness read_randomness(std::istream& in) {
  char magic[4];
  unsigned char head[3];
  if (!in.read(magic, 4) || std::string(magic, 4) != "CRKR") throw ConfigError("bad R magic");
  if (!in.read(reinterpret_cast<char*>(head), 3)) throw ConfigError("truncated R header");
  PublicRandomness R{head[0], {}};
  if (R.n == 0 || R.n > kMaxN) throw ConfigError("bad n in R header");
  const unsigned ell = head[1] | (unsigned{head[2]} << 8);
  const unsigned rec = (R.n + 7) / 8;
  for (unsigned i = 0; i < ell; ++i) {
    std::uint64_t v = 0;
    for (unsigned b = 0; b < rec; ++b) {
      const int c = in.get();
      if (c == std::char_traits<char>::eof()) throw ConfigError("truncated R body");
      v |= std::uint64_t(static_cast<unsigned char>(c)) << (8 * b);
    }
    if (!fits(v, R.n)) throw ConfigError("r_i wider than n bits");
    R.r.push_back(v);
  }
  return R;
}

inline nlohmann::json to_json(const PublicRandomness& R) {
  nlohmann::json arr = nlohmann::json::array();
  for (auto v : R.r) arr.push_back(to_hex(v));
  return {{"n", R.n}, {"r", arr}};
}

inline PublicRandomness randomness_from_json(const nlohmann::json& j) {
  PublicRandomness R{j.at("n").get<unsigned>(), {}};
  for (const auto& v : j.at("r")) {
    const std::uint64_t x = parse_hex(v.get<std::string>());
    if (!fits(x, R.n)) throw ConfigError("r_i wider than n bits");
    R.r.push_back(x);
  }
  return R;
}

/// The ell points h_i(x ^ r_i) whose subverted XOR is g~_R(x).
inline std::vector<OraclePoint> constellation(const Params& p, const PublicRandomness& R, std::uint64_t x) {
  std::vector<OraclePoint> pts;
  pts.reserve(p.ell);
  for (unsigned i = 1; i <= p.ell; ++i) pts.push_back(embed(p, i, x ^ R.at(i)));
  return pts;
}

/// g~_R(x) with the concatenated traces of its ell subverted evaluations.
inline EvalTrace g_tilde(const Subverter& sub, OracleAccess& oracle, const PublicRandomness& R, std::uint64_t x) {
  const Params& p = oracle.params();
  if (!fits(x, p.n)) throw ConfigError("construction input must be n bits");
  EvalTrace out;
  for (unsigned i = 1; i <= p.ell; ++i) {
    EvalTrace t = subverted_eval(sub, oracle, i, x ^ R.at(i));
    out.value ^= t.value;
    out.queries.insert(out.queries.end(), t.queries.begin(), t.queries.end());
  }
  return out;
}

inline EvalTrace g_tilde(const Subverter& sub, const OracleTable& table, const PublicRandomness& R, std::uint64_t x) {
  check_randomness(table.params(), R);
  TableAccess access(table);
  return g_tilde(sub, access, R, x);
}

inline std::uint64_t c_eval(const Subverter& sub, OracleAccess& oracle, const PublicRandomness& R, std::uint64_t x) {
  const std::uint64_t g = g_tilde(sub, oracle, R, x).value;
  return subverted_eval(sub, oracle, 0, g).value;
}

inline std::uint64_t c_eval(const Subverter& sub, const OracleTable& table, const PublicRandomness& R, std::uint64_t x) {
  check_randomness(table.params(), R);
  TableAccess access(table);
  return c_eval(sub, access, R, x);
}

enum class BrokenVariant { single, pair };

/// Negative controls: h~_1(x^r_1), or h~_1(x^r_1) ^ h~_2(x^r_2), cut to n bits.
inline std::uint64_t broken_eval(BrokenVariant v, const Subverter& sub, OracleAccess& oracle,
                                 const PublicRandomness& R, std::uint64_t x) {
  const Params& p = oracle.params();
  if (!fits(x, p.n)) throw ConfigError("construction input must be n bits");
  if (v == BrokenVariant::pair && p.ell < 2) throw ConfigError("pair variant needs ell >= 2");
  std::uint64_t acc = subverted_eval(sub, oracle, 1, x ^ R.at(1)).value;
  if (v == BrokenVariant::pair) acc ^= subverted_eval(sub, oracle, 2, x ^ R.at(2)).value;
  return slice(p, 0, acc);
}

inline std::uint64_t broken_eval(BrokenVariant v, const Subverter& sub, const OracleTable& table,
                                 const PublicRandomness& R, std::uint64_t x) {
  check_randomness(table.params(), R);
  TableAccess access(table);
  return broken_eval(v, sub, access, R, x);
}

}  // namespace crko
