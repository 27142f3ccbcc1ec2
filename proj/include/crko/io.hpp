#pragma once

// Output plumbing: CSV tables and JSON summary sidecars that carry the config
// hash and the unsafe-params flag.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crko/bits.hpp"
#include "crko/oracle.hpp"

namespace crko {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the canonical (sorted-key, compact) dump of a config.
inline std::string config_hash(const nlohmann::json& config) {
  std::string hex = to_hex(fnv1a(config.dump()));
  return std::string(16 - hex.size(), '0') + hex;
}

inline nlohmann::json to_json(const Params& p) {
  return {{"n", p.n}, {"ell", p.ell}, {"n_prime", p.n_prime}, {"L", p.L}, {"seed", p.seed}, {"unsafe_params", p.unsafe}};
}

/// Formats a double with a fixed number of significant digits.
inline std::string fmt(double v, int digits = 10) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

/// Row-oriented CSV; the first line is a comment carrying the config hash
/// (and the unsafe flag when set).
class CsvWriter {
 public:
  CsvWriter(std::vector<std::string> header, std::string hash, bool unsafe)
      : header_(std::move(header)), hash_(std::move(hash)), unsafe_(unsafe) {}

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size()) throw InvariantBreach("CSV row width mismatch");
    rows_.push_back(cells);
  }

  std::string str() const {
    std::ostringstream out;
    out << "# config_hash=" << hash_;
    if (unsafe_) out << " unsafe_params=1";
    out << '\n';
    line(out, header_);
    for (const auto& r : rows_) line(out, r);
    return out.str();
  }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << str();
  }

  std::size_t size() const { return rows_.size(); }

 private:
  static void line(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) out << ',';
      out << cells[k];
    }
    out << '\n';
  }

  std::vector<std::string> header_;
  std::string hash_;
  bool unsafe_;
  std::vector<std::vector<std::string>> rows_;
};

inline void save_json(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

inline nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace crko
