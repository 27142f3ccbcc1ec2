#pragma once

// The adversary's implementation: a deterministic program that computes the
// subverted h~_i(x) with oracle access to the honest h_*. Subverters only see
// query-by-(j, y); they never touch a table directly.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "crko/bits.hpp"
#include "crko/oracle.hpp"
#include "crko/stats.hpp"
#include "crko/trials.hpp"

namespace crko {

/// Sliced oracle values h_j(y), however they are backed (a truth table,
/// simulator tables, pre-drawn data sets).
class OracleAccess {
 public:
  virtual ~OracleAccess() = default;
  virtual const Params& params() const = 0;
  virtual std::uint64_t h(unsigned j, std::uint64_t y) = 0;
};

class TableAccess final : public OracleAccess {
 public:
  explicit TableAccess(const OracleTable& t) : t_(&t) {}
  const Params& params() const override { return t_->params(); }
  std::uint64_t h(unsigned j, std::uint64_t y) override { return t_->value(j, y); }

 private:
  const OracleTable* t_;
};

class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(unsigned index, std::uint64_t input, unsigned budget)
      : std::runtime_error("subverted evaluation of h_" + std::to_string(index) + "(0x" + to_hex(input) +
                           ") exceeded its query budget of " + std::to_string(budget)),
        index_(index),
        input_(input),
        budget_(budget) {}
  unsigned index() const noexcept { return index_; }
  std::uint64_t input() const noexcept { return input_; }
  unsigned budget() const noexcept { return budget_; }

 private:
  unsigned index_;
  std::uint64_t input_;
  unsigned budget_;
};

struct TraceEntry {
  OraclePoint point;
  std::uint64_t value = 0;  // sliced, as the subverter saw it

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct EvalTrace {
  std::uint64_t value = 0;
  std::vector<TraceEntry> queries;

  friend bool operator==(const EvalTrace&, const EvalTrace&) = default;
};

/// Per-evaluation view of the oracle: counts, enforces the budget, records.
class QueryHandle {
 public:
  QueryHandle(OracleAccess& oracle, unsigned budget, unsigned index, std::uint64_t input)
      : oracle_(&oracle), budget_(budget), index_(index), input_(input) {}

  const Params& params() const { return oracle_->params(); }

  std::uint64_t operator()(unsigned j, std::uint64_t y) {
    const OraclePoint z = embed(params(), j, y);
    if (trace_.size() >= budget_) throw BudgetExceeded(index_, input_, budget_);
    const std::uint64_t v = oracle_->h(j, y);
    trace_.push_back({z, v});
    return v;
  }

  std::vector<TraceEntry> take_trace() && { return std::move(trace_); }

 private:
  OracleAccess* oracle_;
  unsigned budget_;
  unsigned index_;
  std::uint64_t input_;
  std::vector<TraceEntry> trace_;
};

enum class SubverterKind { honest, prefix_trigger, zero_suffix, peel_single, peel_split, prf_gated, echo_probe, custom };

/// Index selector for trigger-style subverters: one index, or every i >= 1.
inline constexpr int kAllMixingIndices = -1;

struct SubverterSpec {
  SubverterKind kind = SubverterKind::honest;
  std::uint64_t z = 0;    // trigger / suffix pattern, or the peel message m
  unsigned k = 0;         // pattern length in bits
  int target = 0;         // function index the trigger applies to
  std::uint64_t key = 0;  // prf_gated key

  friend bool operator==(const SubverterSpec&, const SubverterSpec&) = default;
};

class Subverter {
 public:
  virtual ~Subverter() = default;
  /// h~_i(x). Deterministic in (i, x) and the answers it receives.
  virtual std::uint64_t evaluate(unsigned i, std::uint64_t x, QueryHandle& oracle) const = 0;
  virtual unsigned budget() const = 0;
  virtual std::string label() const = 0;
  virtual std::optional<SubverterSpec> spec() const { return std::nullopt; }
};

using SubverterPtr = std::shared_ptr<const Subverter>;

/// h~_i(x) together with the ordered queries made while computing it.
inline EvalTrace subverted_eval(const Subverter& sub, OracleAccess& oracle, unsigned i, std::uint64_t x) {
  const Params& p = oracle.params();
  (void)embed(p, i, x);
  QueryHandle handle(oracle, sub.budget(), i, x);
  EvalTrace out;
  out.value = sub.evaluate(i, x, handle);
  if (!fits(out.value, p.out_width(i)))
    throw InvariantBreach(sub.label() + " returned a value wider than h_" + std::to_string(i) + "'s range");
  out.queries = std::move(handle).take_trace();
  return out;
}

inline EvalTrace subverted_eval(const Subverter& sub, const OracleTable& table, unsigned i, std::uint64_t x) {
  TableAccess access(table);
  return subverted_eval(sub, access, i, x);
}

namespace detail {

class BuiltinSubverter final : public Subverter {
 public:
  explicit BuiltinSubverter(SubverterSpec spec) : spec_(spec) {}

  std::uint64_t evaluate(unsigned i, std::uint64_t x, QueryHandle& h) const override {
    const Params& p = h.params();
    switch (spec_.kind) {
      case SubverterKind::honest:
        return h(i, x);
      case SubverterKind::prefix_trigger: {
        if (!targets(i)) return h(i, x);
        const unsigned w = p.in_width(i);
        if ((x >> (w - spec_.k)) == spec_.z) return x & mask(w - spec_.k) & mask(p.out_width(i));
        return h(i, x);
      }
      case SubverterKind::zero_suffix:
        if (targets(i) && (x & mask(spec_.k)) == spec_.z) return 0;
        return h(i, x);
      case SubverterKind::peel_single:
        if (i == 1 && x == spec_.z) return 0;
        return h(i, x);
      case SubverterKind::peel_split: {
        const unsigned half = p.n / 2;
        if (i == 1 && (x >> half) == spec_.z) return 0;
        if (i == 2 && (x & mask(half)) == spec_.z) return 0;
        return h(i, x);
      }
      case SubverterKind::prf_gated: {
        if (!targets(i)) return h(i, x);
        const unsigned w = p.in_width(i);
        const std::uint64_t head = x >> spec_.k;
        const std::uint64_t tag = x & mask(spec_.k);
        if (tag == (keyed_permutation(head, w - spec_.k) & mask(spec_.k))) return 0;
        return h(i, x);
      }
      case SubverterKind::echo_probe: {
        const std::uint64_t v = h(i, x);
        if (i > 0) (void)h(0, v);
        return v;
      }
      case SubverterKind::custom:
        break;
    }
    throw InvariantBreach("unhandled subverter kind");
  }

  unsigned budget() const override { return spec_.kind == SubverterKind::echo_probe ? 2 : 1; }

  std::string label() const override;
  std::optional<SubverterSpec> spec() const override { return spec_; }

 private:
  bool targets(unsigned i) const noexcept {
    return spec_.target == kAllMixingIndices ? i > 0 : static_cast<int>(i) == spec_.target;
  }

  // Four-round Feistel over `width` bits keyed by spec_.key.
  std::uint64_t keyed_permutation(std::uint64_t v, unsigned width) const noexcept {
    if (width == 0) return 0;
    if (width == 1) return v ^ (derive_seed(spec_.key, Stream::prf, 1) & 1);
    const unsigned lw = width / 2;
    const unsigned rw = width - lw;
    std::uint64_t left = v >> rw;
    std::uint64_t right = v & mask(rw);
    const std::uint64_t k = derive_seed(spec_.key, Stream::prf, width);
    for (std::uint64_t round = 0; round < 4; round += 2) {
      right ^= keyed(k, round, left) & mask(rw);
      left ^= keyed(k, round + 1, right) & mask(lw);
    }
    return (left << rw) | right;
  }

  SubverterSpec spec_;
};

inline std::string kind_name(SubverterKind k) {
  switch (k) {
    case SubverterKind::honest: return "honest";
    case SubverterKind::prefix_trigger: return "prefix_trigger";
    case SubverterKind::zero_suffix: return "zero_suffix";
    case SubverterKind::peel_single: return "peel_single";
    case SubverterKind::peel_split: return "peel_split";
    case SubverterKind::prf_gated: return "prf_gated";
    case SubverterKind::echo_probe: return "echo_probe";
    case SubverterKind::custom: return "custom";
  }
  return "?";
}

inline std::string BuiltinSubverter::label() const {
  std::string s = kind_name(spec_.kind);
  switch (spec_.kind) {
    case SubverterKind::prefix_trigger:
    case SubverterKind::zero_suffix:
    case SubverterKind::prf_gated:
      s += "(k=" + std::to_string(spec_.k) + ",target=" +
           (spec_.target == kAllMixingIndices ? std::string("all") : std::to_string(spec_.target)) + ")";
      break;
    case SubverterKind::peel_single:
    case SubverterKind::peel_split:
      s += "(m=0x" + to_hex(spec_.z) + ")";
      break;
    default:
      break;
  }
  return s;
}

}  // namespace detail

inline SubverterKind parse_subverter_kind(const std::string& s) {
  for (auto k : {SubverterKind::honest, SubverterKind::prefix_trigger, SubverterKind::zero_suffix,
                 SubverterKind::peel_single, SubverterKind::peel_split, SubverterKind::prf_gated,
                 SubverterKind::echo_probe}) {
    if (detail::kind_name(k) == s) return k;
  }
  throw ConfigError("unknown subverter kind '" + s + "'");
}

/// Builds a built-in subverter, checking pattern widths against `p`.
inline SubverterPtr make_subverter(const SubverterSpec& spec, const Params& p) {
  auto check_target = [&] {
    if (spec.target != kAllMixingIndices && (spec.target < 0 || spec.target > static_cast<int>(p.ell)))
      throw ConfigError("subverter target index out of range");
  };
  const unsigned width = spec.target == 0 ? p.wide() : p.n;
  switch (spec.kind) {
    case SubverterKind::honest:
    case SubverterKind::echo_probe:
      break;
    case SubverterKind::prefix_trigger:
    case SubverterKind::zero_suffix:
    case SubverterKind::prf_gated:
      check_target();
      if (spec.k == 0 && spec.kind != SubverterKind::zero_suffix)
        throw ConfigError("trigger length must be at least 1");
      if (spec.k > width)
        throw ConfigError("trigger of " + std::to_string(spec.k) + " bits is longer than the " +
                          std::to_string(width) + "-bit input");
      if (spec.kind != SubverterKind::prf_gated && !fits(spec.z, spec.k))
        throw ConfigError("trigger pattern does not fit in k bits");
      break;
    case SubverterKind::peel_single:
      if (!fits(spec.z, p.n)) throw ConfigError("peel message must be n bits");
      break;
    case SubverterKind::peel_split:
      if (p.n % 2 != 0) throw ConfigError("peel_split needs an even n");
      if (p.ell < 2) throw ConfigError("peel_split needs ell >= 2");
      if (!fits(spec.z, p.n / 2)) throw ConfigError("peel_split message must be n/2 bits");
      break;
    case SubverterKind::custom:
      throw ConfigError("custom subverters are built with make_custom_subverter");
  }
  return std::make_shared<detail::BuiltinSubverter>(spec);
}

inline SubverterPtr make_honest(const Params& p) { return make_subverter({}, p); }

/// In-process subverter from a callable; used for fixtures and plugins.
inline SubverterPtr make_custom_subverter(
    std::string label, unsigned budget,
    std::function<std::uint64_t(unsigned, std::uint64_t, QueryHandle&)> fn) {
  class Custom final : public Subverter {
   public:
    Custom(std::string l, unsigned b, std::function<std::uint64_t(unsigned, std::uint64_t, QueryHandle&)> f)
        : label_(std::move(l)), budget_(b), fn_(std::move(f)) {}
    std::uint64_t evaluate(unsigned i, std::uint64_t x, QueryHandle& h) const override { return fn_(i, x, h); }
    unsigned budget() const override { return budget_; }
    std::string label() const override { return label_; }

   private:
    std::string label_;
    unsigned budget_;
    std::function<std::uint64_t(unsigned, std::uint64_t, QueryHandle&)> fn_;
  };
  return std::make_shared<Custom>(std::move(label), budget, std::move(fn));
}

inline nlohmann::json to_json(const SubverterSpec& s) {
  nlohmann::json j{{"kind", detail::kind_name(s.kind)}};
  switch (s.kind) {
    case SubverterKind::prefix_trigger:
    case SubverterKind::zero_suffix:
      j["z"] = to_hex(s.z);
      [[fallthrough]];
    case SubverterKind::prf_gated:
      j["k"] = s.k;
      if (s.target == kAllMixingIndices) j["target"] = "all";
      else j["target"] = s.target;
      if (s.kind == SubverterKind::prf_gated) j["key"] = to_hex(s.key);
      break;
    case SubverterKind::peel_single:
    case SubverterKind::peel_split:
      j["m"] = to_hex(s.z);
      break;
    default:
      break;
  }
  return j;
}

inline SubverterSpec subverter_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("subverter must be an object with a kind");
  SubverterSpec s;
  s.kind = parse_subverter_kind(j.at("kind").get<std::string>());
  auto hex_field = [&](const char* name) -> std::uint64_t {
    if (!j.contains(name)) throw ConfigError(std::string("subverter field '") + name + "' is required");
    return parse_hex(j.at(name).get<std::string>());
  };
  switch (s.kind) {
    case SubverterKind::prefix_trigger:
    case SubverterKind::zero_suffix:
      s.k = j.at("k").get<unsigned>();
      s.z = j.contains("z") ? hex_field("z") : 0;
      break;
    case SubverterKind::prf_gated:
      s.k = j.at("k").get<unsigned>();
      s.key = hex_field("key");
      break;
    case SubverterKind::peel_single:
    case SubverterKind::peel_split:
      s.z = hex_field("m");
      break;
    default:
      break;
  }
  if (j.contains("target")) {
    const auto& t = j.at("target");
    s.target = t.is_string() && t.get<std::string>() == "all" ? kAllMixingIndices : t.get<int>();
  }
  return s;
}

struct Disagreement {
  unsigned index = 0;
  Proportion rate;
  bool exhaustive = false;
};

struct EpsilonOptions {
  std::uint64_t trials = 1;     // tables (exhaustive) or (table, x) samples (Monte Carlo)
  bool allow_exhaustive = true;
  std::vector<unsigned> indices;  // empty: all of 0..ell
  unsigned workers = 1;
};

/// Measured per-index disagreement Pr_x[h~_i(x) != h_i(x)] over fresh tables.
/// Indices whose domain fits the enumeration cap are enumerated exactly on
/// each table; the rest use one uniform x per trial table.
inline std::vector<Disagreement> estimate_epsilon(const Subverter& sub, const Params& p, EpsilonOptions opt) {
  if (opt.trials == 0) throw ConfigError("trials must be at least 1");
  std::vector<unsigned> indices = opt.indices;
  if (indices.empty())
    for (unsigned i = 0; i <= p.ell; ++i) indices.push_back(i);
  const unsigned cap = enumeration_cap();
  std::vector<Disagreement> out;
  for (unsigned i : indices) {
    if (i > p.ell) throw ConfigError("index out of range in estimate_epsilon");
    const unsigned w = p.in_width(i);
    const bool exhaustive = opt.allow_exhaustive && w <= cap;
    struct Count {
      std::uint64_t hits = 0, total = 0;
    };
    auto counts = parallel_map(opt.trials, opt.workers, [&](std::uint64_t t) {
      Params pt = p;
      pt.seed = trial_seed(p.seed, t, 0xE95);
      const OracleTable table(pt);
      TableAccess access(table);
      Count c;
      if (exhaustive) {
        for (std::uint64_t x = 0; x <= mask(w); ++x) {
          c.hits += subverted_eval(sub, access, i, x).value != table.value(i, x);
          ++c.total;
        }
      } else {
        KeyedRng rng(derive_seed(pt.seed, Stream::coins, i));
        const std::uint64_t x = rng.bits(w);
        c.hits += subverted_eval(sub, access, i, x).value != table.value(i, x);
        c.total = 1;
      }
      return c;
    });
    std::uint64_t hits = 0, total = 0;
    for (const auto& c : counts) {
      hits += c.hits;
      total += c.total;
    }
    out.push_back({i, wilson(hits, total), exhaustive});
  }
  return out;
}

}  // namespace crko
