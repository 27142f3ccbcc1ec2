#pragma once

// The game ladder G1 .. G4, transcripts, distinguishers, advantage estimation
// and the Exp-Many / Exp-One experiments.

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "crko/bits.hpp"
#include "crko/construction.hpp"
#include "crko/oracle.hpp"
#include "crko/simulator.hpp"
#include "crko/stats.hpp"
#include "crko/subversion.hpp"
#include "crko/trials.hpp"

namespace crko {

inline constexpr int kTargetF = -1;

struct TranscriptEntry {
  int target = kTargetF;  // -1 for F, otherwise the h index
  std::uint64_t input = 0;
  std::uint64_t answer = 0;
  bool repair = false;  // appended by normal-form repair

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

struct Transcript {
  PublicRandomness R;  // alpha[0]
  std::vector<TranscriptEntry> entries;

  friend bool operator==(const Transcript&, const Transcript&) = default;

  /// Length of the longest common prefix alpha[k] (entries only).
  std::size_t common_prefix(const Transcript& o) const {
    if (!(R == o.R)) return 0;
    std::size_t k = 0;
    while (k < entries.size() && k < o.entries.size() && entries[k] == o.entries[k]) ++k;
    return k;
  }
};

inline nlohmann::json to_json(const Transcript& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : t.entries)
    rows.push_back({{"target", e.target == kTargetF ? std::string("F") : "h" + std::to_string(e.target)},
                    {"input", to_hex(e.input)},
                    {"answer", to_hex(e.answer)},
                    {"repair", e.repair}});
  return {{"R", to_json(t.R)}, {"entries", rows}};
}

class QueryBudgetExceeded : public std::runtime_error {
 public:
  explicit QueryBudgetExceeded(unsigned budget)
      : std::runtime_error("distinguisher exceeded its query budget of " + std::to_string(budget)) {}
};

/// The two oracles a distinguisher talks to.
class GameOracles {
 public:
  virtual ~GameOracles() = default;
  virtual const Params& params() const = 0;
  virtual const PublicRandomness& R() const = 0;
  virtual std::uint64_t F(std::uint64_t x) = 0;
  virtual std::uint64_t H(unsigned i, std::uint64_t x) = 0;
};

class Distinguisher {
 public:
  virtual ~Distinguisher() = default;
  /// 1 = "claims real".
  virtual bool run(GameOracles& o, KeyedRng& coins) const = 0;
  virtual unsigned q_budget() const = 0;
  virtual std::string label() const = 0;
};

using DistinguisherPtr = std::shared_ptr<const Distinguisher>;

enum class GameVariant { G1, G2_1, G2_2, G3_1, G3_2, G4 };
enum class Construction { full, broken_single, broken_pair };

inline std::string variant_name(GameVariant v) {
  switch (v) {
    case GameVariant::G1: return "G1";
    case GameVariant::G2_1: return "G2.1";
    case GameVariant::G2_2: return "G2.2";
    case GameVariant::G3_1: return "G3.1";
    case GameVariant::G3_2: return "G3.2";
    case GameVariant::G4: return "G4";
  }
  return "?";
}

inline GameVariant parse_variant(const std::string& s) {
  for (auto v : {GameVariant::G1, GameVariant::G2_1, GameVariant::G2_2, GameVariant::G3_1, GameVariant::G3_2,
                 GameVariant::G4})
    if (variant_name(v) == s) return v;
  throw ConfigError("unknown game variant '" + s + "'");
}

struct GameSeeds {
  PublicRandomness R;
  std::uint64_t coins = 0;
};

struct GameOptions {
  Construction construction = Construction::full;  // G1 only
  std::optional<OracleTable> table;                // G1/G2.x: replaces the seeded table
  bool repair = true;
  bool keep_log = false;
};

struct GameResult {
  bool decision = false;
  Transcript transcript;
  CrisisFlags flags;
  std::vector<std::uint64_t> repairs;  // anchors whose constellation was appended
  std::shared_ptr<LazyEngine> engine;  // null for G1 / G2.1
};

namespace detail {

class Session final : public GameOracles {
 public:
  Session(GameVariant v, SubverterPtr sub, const Params& p, const GameSeeds& s, const GameOptions& opt, unsigned budget)
      : v_(v), sub_(std::move(sub)), p_(p), budget_(budget), opt_(opt) {
    check_randomness(p_, s.R);
    t_.R = s.R;
    table_ = opt.table ? *opt.table : OracleTable(p_);
    if (opt.table && !(opt.table->params() == p_)) throw ConfigError("table override has different params");
    EngineOptions eo;
    eo.keep_log = opt.keep_log;
    switch (v_) {
      case GameVariant::G1:
      case GameVariant::G2_1:
        break;
      case GameVariant::G2_2:
        eo.detect_subv = true;
        engine_ = std::make_shared<LazyEngine>(Regime::clean, std::make_shared<TableSource>(table_), s.R, sub_, eo);
        break;
      case GameVariant::G3_1:
        engine_ = std::make_shared<LazyEngine>(Regime::programmed, std::make_shared<DataSets>(p_), s.R, sub_, eo);
        break;
      case GameVariant::G3_2:
        engine_ = std::make_shared<LazyEngine>(Regime::programmed,
                                               std::make_shared<DataSets>(DataSets(p_).materialized()), s.R, sub_, eo);
        break;
      case GameVariant::G4:
        engine_ = std::make_shared<LazyEngine>(Regime::simulator, std::make_shared<DataSets>(p_), s.R, sub_, eo);
        break;
    }
  }

  const Params& params() const override { return p_; }
  const PublicRandomness& R() const override { return t_.R; }

  std::uint64_t F(std::uint64_t x) override {
    if (!fits(x, p_.n)) throw ConfigError("F takes n-bit inputs");
    charge();
    f_queries_.insert(x);
    std::uint64_t v;
    if (engine_) {
      engine_->set_step(t_.entries.size());
      v = engine_->query_F(x);
    } else if (v_ == GameVariant::G1) {
      switch (opt_.construction) {
        case Construction::full: v = c_eval(*sub_, table_, t_.R, x); break;
        case Construction::broken_single: v = broken_eval(BrokenVariant::single, *sub_, table_, t_.R, x); break;
        default: v = broken_eval(BrokenVariant::pair, *sub_, table_, t_.R, x); break;
      }
    } else {
      v = table_.value(0, g_tilde(*sub_, table_, t_.R, x).value);
    }
    t_.entries.push_back({kTargetF, x, v, false});
    return v;
  }

  std::uint64_t H(unsigned i, std::uint64_t x) override {
    charge();
    return answer_h(i, x, false);
  }

  void finish(GameResult& out) {
    if (opt_.repair) {
      for (auto x : f_queries_) {
        if (constellations_.contains(x)) continue;
        out.repairs.push_back(x);
        (void)answer_h(1, x ^ t_.R.at(1), true);
      }
    }
    out.transcript = std::move(t_);
    if (engine_) {
      out.flags = engine_->flags();
      out.engine = engine_;
    }
  }

 private:
  void charge() {
    if (used_ >= budget_) throw QueryBudgetExceeded(budget_);
    ++used_;
  }

  std::uint64_t answer_h(unsigned i, std::uint64_t x, bool repair) {
    (void)embed(p_, i, x);
    if (i > 0) constellations_.insert(x ^ t_.R.at(i));
    std::uint64_t v;
    if (engine_) {
      engine_->set_step(t_.entries.size());
      v = engine_->query_h(i, x);
    } else {
      v = table_.value(i, x);
    }
    t_.entries.push_back({static_cast<int>(i), x, v, repair});
    return v;
  }

  GameVariant v_;
  SubverterPtr sub_;
  Params p_;
  unsigned budget_;
  unsigned used_ = 0;
  GameOptions opt_;
  OracleTable table_;
  std::shared_ptr<LazyEngine> engine_;
  Transcript t_;
  std::set<std::uint64_t> f_queries_;
  std::set<std::uint64_t> constellations_;
};

}  // namespace detail

/// One seeded run of a game. p.seed keys the truth table / data sets.
inline GameResult run_game(GameVariant v, const Distinguisher& D, SubverterPtr sub, const Params& p,
                           const GameSeeds& seeds, const GameOptions& opt = {}) {
  detail::Session s(v, std::move(sub), p, seeds, opt, D.q_budget());
  KeyedRng coins(derive_seed(seeds.coins, Stream::coins, 0));
  GameResult out;
  out.decision = D.run(s, coins);
  s.finish(out);
  return out;
}

/// G2.2's post-interaction fill-in: F(x) := h_0(g~(x)) on every empty cell,
/// with h_* the table the game drew from.
inline std::vector<std::uint64_t> clean_fill_in(const GameResult& r, const Subverter& sub, const OracleTable& table) {
  if (!r.engine || r.engine->regime() != Regime::clean) throw ConfigError("fill-in is defined for G2.2 runs");
  const Params& p = table.params();
  require_cap(p.n, enumeration_cap(), "F fill-in");
  std::vector<std::uint64_t> F(std::size_t{1} << p.n);
  for (std::uint64_t x = 0; x < F.size(); ++x) {
    auto it = r.engine->tf().find(x);
    F[x] = it != r.engine->tf().end() ? it->second
                                      : table.value(0, g_tilde(sub, table, r.engine->randomness(), x).value);
  }
  return F;
}

/// Re-checks every fired witness of a G2.2 / G3.x / G4 run against its tables.
inline bool verify_witnesses(const GameResult& r) {
  if (!r.engine) return true;
  const LazyEngine& e = *r.engine;
  auto ok = true;
  auto g_of = [&](std::uint64_t a) -> std::optional<std::uint64_t> {
    const Completion* c = e.completion(a);
    if (!c) return std::nullopt;
    return c->g;
  };
  auto check_g = [&](const Witness& w) {
    if (!w.fired) return;
    auto g = g_of(w.anchor);
    ok &= g.has_value() && *g == w.point;
  };
  check_g(r.flags.pred);
  check_g(r.flags.selfref);
  check_g(r.flags.forwardpred);
  check_g(r.flags.backwardpred);
  check_g(r.flags.subv);
  if (r.flags.pred.fired) ok &= e.completion(r.flags.pred.anchor)->h0_preassigned;
  if (r.flags.selfref.fired) ok &= e.completion(r.flags.selfref.anchor)->h0_self_queried;
  if (r.flags.forwardpred.fired) ok &= e.lookup({0, r.flags.forwardpred.point}).has_value();
  if (r.flags.backwardpred.fired) ok &= e.f_queries().contains(r.flags.backwardpred.anchor);
  return ok;
}

// ---------------------------------------------------------------- distinguishers

enum class DistinguisherKind {
  constant, random_probe, constellation_sweep, consistency_check, peel_single_attack, peel_split_attack,
  trigger_attack
};

struct DistinguisherSpec {
  DistinguisherKind kind = DistinguisherKind::constant;
  unsigned q = 16;       // random_probe query count
  bool bit = true;       // constant output
  std::uint64_t m = 0;   // peel message
  std::uint64_t z = 0;   // trigger pattern
  unsigned k = 0;        // trigger length
};

inline std::string distinguisher_kind_name(DistinguisherKind k) {
  switch (k) {
    case DistinguisherKind::constant: return "constant";
    case DistinguisherKind::random_probe: return "random_probe";
    case DistinguisherKind::constellation_sweep: return "constellation_sweep";
    case DistinguisherKind::consistency_check: return "consistency_check";
    case DistinguisherKind::peel_single_attack: return "peel_single_attack";
    case DistinguisherKind::peel_split_attack: return "peel_split_attack";
    case DistinguisherKind::trigger_attack: return "trigger_attack";
  }
  return "?";
}

inline DistinguisherKind parse_distinguisher_kind(const std::string& s) {
  for (auto k : {DistinguisherKind::constant, DistinguisherKind::random_probe, DistinguisherKind::constellation_sweep,
                 DistinguisherKind::consistency_check, DistinguisherKind::peel_single_attack,
                 DistinguisherKind::peel_split_attack, DistinguisherKind::trigger_attack})
    if (distinguisher_kind_name(k) == s) return k;
  throw ConfigError("unknown distinguisher kind '" + s + "'");
}

inline nlohmann::json to_json(const DistinguisherSpec& d) {
  nlohmann::json j{{"kind", distinguisher_kind_name(d.kind)}};
  switch (d.kind) {
    case DistinguisherKind::constant: j["bit"] = d.bit ? 1 : 0; break;
    case DistinguisherKind::random_probe: j["q"] = d.q; break;
    case DistinguisherKind::peel_single_attack:
    case DistinguisherKind::peel_split_attack: j["m"] = to_hex(d.m); break;
    case DistinguisherKind::trigger_attack:
      j["z"] = to_hex(d.z);
      j["k"] = d.k;
      break;
    default: break;
  }
  return j;
}

inline DistinguisherSpec distinguisher_spec_from_json(const nlohmann::json& j) {
  DistinguisherSpec d;
  d.kind = parse_distinguisher_kind(j.at("kind").get<std::string>());
  if (j.contains("q")) d.q = j.at("q").get<unsigned>();
  if (j.contains("bit")) d.bit = j.at("bit").get<int>() != 0;
  if (j.contains("m")) d.m = parse_hex(j.at("m").get<std::string>());
  if (j.contains("z")) d.z = parse_hex(j.at("z").get<std::string>());
  if (j.contains("k")) d.k = j.at("k").get<unsigned>();
  return d;
}

namespace detail {

// The distinguisher's B oracle seen as an oracle for running H~ itself.
class BAccess final : public OracleAccess {
 public:
  explicit BAccess(GameOracles& o) : o_(&o) {}
  const Params& params() const override { return o_->params(); }
  std::uint64_t h(unsigned j, std::uint64_t y) override { return o_->H(j, y); }

 private:
  GameOracles* o_;
};

class BuiltinDistinguisher final : public Distinguisher {
 public:
  BuiltinDistinguisher(DistinguisherSpec s, SubverterPtr sub, const Params& p) : s_(s), sub_(std::move(sub)), p_(p) {}

  bool run(GameOracles& o, KeyedRng& coins) const override {
    const Params& p = o.params();
    const PublicRandomness& R = o.R();
    switch (s_.kind) {
      case DistinguisherKind::constant:
        return s_.bit;
      case DistinguisherKind::random_probe: {
        std::uint64_t acc = 0;
        for (unsigned q = 0; q < s_.q; ++q) {
          switch (coins.below(3)) {
            case 0: acc ^= o.F(coins.bits(p.n)); break;
            case 1: acc ^= o.H(0, coins.bits(p.wide())); break;
            default: {
              const unsigned i = 1 + static_cast<unsigned>(coins.below(p.ell));
              acc ^= o.H(i, coins.bits(p.n));
            }
          }
        }
        return (acc & 1U) != 0;
      }
      case DistinguisherKind::constellation_sweep: {
        std::uint64_t acc = 0;
        const std::uint64_t count = std::min<std::uint64_t>(std::uint64_t{1} << p.n, q_budget());
        for (std::uint64_t x = 0; x < count; ++x) acc ^= o.H(1, x ^ R.at(1));
        return (acc & 1U) != 0;
      }
      case DistinguisherKind::consistency_check: {
        const std::uint64_t x = coins.bits(p.n);
        const std::uint64_t f = o.F(x);
        BAccess b(o);
        const std::uint64_t g = g_tilde(*sub_, b, R, x).value;
        return subverted_eval(*sub_, b, 0, g).value == f;
      }
      case DistinguisherKind::peel_single_attack:
        return o.F(s_.m ^ R.at(1)) == 0;
      case DistinguisherKind::peel_split_attack: {
        const unsigned half = p.n / 2;
        const std::uint64_t hi = (s_.m ^ (R.at(1) >> half)) & mask(half);
        const std::uint64_t lo = (s_.m ^ R.at(2)) & mask(half);
        return o.F((hi << half) | lo) == 0;
      }
      case DistinguisherKind::trigger_attack: {
        BAccess b(o);
        const unsigned w = p.wide();
        for (std::uint64_t x = 0; x < (std::uint64_t{1} << p.n); ++x) {
          const std::uint64_t g = g_tilde(*sub_, b, R, x).value;
          if ((g >> (w - s_.k)) != s_.z) continue;
          return o.F(x) == (g & mask(w - s_.k) & mask(p.n));
        }
        return false;
      }
    }
    return false;
  }

  unsigned q_budget() const override {
    const unsigned b = sub_ ? sub_->budget() : 1;
    switch (s_.kind) {
      case DistinguisherKind::constant: return 0;
      case DistinguisherKind::random_probe: return s_.q;
      case DistinguisherKind::constellation_sweep: return 1U << std::min(p_.n, 16U);
      case DistinguisherKind::consistency_check: return 1 + p_.ell * b + b;
      case DistinguisherKind::peel_single_attack:
      case DistinguisherKind::peel_split_attack: return 1;
      case DistinguisherKind::trigger_attack: return (1U << p_.n) * p_.ell * b + 1;
    }
    return 0;
  }

  std::string label() const override { return distinguisher_kind_name(s_.kind); }

 private:
  DistinguisherSpec s_;
  SubverterPtr sub_;
  Params p_;
};

}  // namespace detail

/// `sub` is the distinguisher's own subversion program (used by the kinds
/// that recompute the construction through their h-oracle).
inline DistinguisherPtr make_distinguisher(const DistinguisherSpec& s, SubverterPtr sub, const Params& p) {
  switch (s.kind) {
    case DistinguisherKind::consistency_check:
    case DistinguisherKind::trigger_attack:
      if (!sub) throw ConfigError(distinguisher_kind_name(s.kind) + " needs the subversion program");
      break;
    default:
      break;
  }
  if (s.kind == DistinguisherKind::peel_single_attack && !fits(s.m, p.n)) throw ConfigError("peel message must be n bits");
  if (s.kind == DistinguisherKind::peel_split_attack) {
    if (p.n % 2 != 0 || p.ell < 2) throw ConfigError("peel_split_attack needs even n and ell >= 2");
    if (!fits(s.m, p.n / 2)) throw ConfigError("peel_split message must be n/2 bits");
  }
  if (s.kind == DistinguisherKind::trigger_attack && (s.k == 0 || s.k > p.wide() || !fits(s.z, s.k)))
    throw ConfigError("trigger pattern must be 1..3n bits");
  if (s.kind == DistinguisherKind::constellation_sweep) require_cap(p.n, 16, "constellation sweep");
  return std::make_shared<detail::BuiltinDistinguisher>(s, std::move(sub), p);
}

// ---------------------------------------------------------------- couplings

/// Per-trial seeds: table/data-set seed, R and coins, all from (master, trial, arm).
struct TrialSetup {
  Params params;
  GameSeeds seeds;
};

inline TrialSetup trial_setup(const Params& base, std::uint64_t master, std::uint64_t trial, std::uint64_t arm = 0) {
  TrialSetup t;
  t.params = base;
  t.params.seed = trial_seed(master, trial, 3 * arm);
  t.seeds.R = sample_R(base, trial_seed(master, trial, 3 * arm + 1));
  t.seeds.coins = trial_seed(master, trial, 3 * arm + 2);
  return t;
}

/// The table the clean games run on so that they share coins with G3.2 over
/// the data sets: h_i and free h_0 from the data sets, and every h_0 cell that
/// G3.2 programmed carries F in its first n bits.
inline OracleTable coupled_table(const Params& p, const LazyEngine& g32) {
  OracleTable t(p);
  std::map<std::uint64_t, std::uint64_t> programmed;
  for (const auto& [k, c] : g32.th())
    if (c.tag == Tag::programmed) programmed.emplace(k, c.value);
  for (const auto& [k, f] : programmed) {
    const OraclePoint z = unflat(p, k);
    t = t.resample(z, (f << (2 * p.n)) | (t.raw(z) & mask(2 * p.n)));
  }
  return t;
}

struct LadderRun {
  GameResult g1, g21, g22, g31, g32, g4;
  bool g1_vs_g4_diverged = false;
  bool g32_vs_g4_diverged = false;
  /// Divergences between G1 and G4 that no crisis flag accounts for.
  bool unexplained = false;
  bool g32_g4_unexplained = false;
};

/// One seeded pass down the ladder with shared coins throughout.
inline LadderRun run_ladder(const Distinguisher& D, SubverterPtr sub, const TrialSetup& t) {
  LadderRun r;
  r.g32 = run_game(GameVariant::G3_2, D, sub, t.params, t.seeds);
  r.g4 = run_game(GameVariant::G4, D, sub, t.params, t.seeds);
  GameOptions coupled;
  coupled.table = coupled_table(t.params, *r.g32.engine);
  r.g1 = run_game(GameVariant::G1, D, sub, t.params, t.seeds, coupled);
  r.g22 = run_game(GameVariant::G2_2, D, sub, t.params, t.seeds, coupled);
  r.g1_vs_g4_diverged = !(r.g1.transcript == r.g4.transcript);
  r.g32_vs_g4_diverged = !(r.g32.transcript == r.g4.transcript);
  const bool fp_bp = r.g32.flags.forwardpred.fired || r.g32.flags.backwardpred.fired;
  const auto& f2 = r.g22.flags;
  r.unexplained = r.g1_vs_g4_diverged && !(f2.pred.fired || f2.subv.fired || f2.selfref.fired || fp_bp);
  r.g32_g4_unexplained = r.g32_vs_g4_diverged && !fp_bp;
  return r;
}

// ---------------------------------------------------------------- advantage

struct AdvantageReport {
  Proportion real;   // 1-decisions against (C, H)
  Proportion ideal;  // 1-decisions against (F, S)
  Difference diff;   // real - ideal
  double advantage = 0.0;
  double lo = 0.0;   // CI for |real - ideal|
  double hi = 0.0;
};

inline AdvantageReport estimate_advantage(const Distinguisher& D, SubverterPtr sub, const Params& p,
                                          std::uint64_t trials, std::uint64_t master, unsigned workers = 1,
                                          Construction real = Construction::full) {
  if (trials < 100) throw ConfigError("advantage estimation needs at least 100 trials");
  auto arm = [&](std::uint64_t a, GameVariant v) {
    GameOptions opt;
    opt.construction = real;
    auto bits = parallel_map(trials, workers, [&](std::uint64_t t) -> std::uint8_t {
      const TrialSetup s = trial_setup(p, master, t, a);
      return run_game(v, D, sub, s.params, s.seeds, opt).decision ? 1 : 0;
    });
    std::uint64_t hits = 0;
    for (auto b : bits) hits += b;
    return wilson(hits, trials);
  };
  AdvantageReport r;
  r.real = arm(1, GameVariant::G1);
  r.ideal = arm(2, GameVariant::G4);
  r.diff = two_proportion(r.real, r.ideal);
  r.advantage = std::abs(r.diff.estimate);
  if (r.diff.lo > 0) {
    r.lo = r.diff.lo;
    r.hi = r.diff.hi;
  } else if (r.diff.hi < 0) {
    r.lo = -r.diff.hi;
    r.hi = -r.diff.lo;
  } else {
    r.lo = 0;
    r.hi = std::max(-r.diff.lo, r.diff.hi);
  }
  return r;
}

// ---------------------------------------------------------------- Exp-Many / Exp-One

/// I(x, i): H~'s value on h_i(x) computed against the data sets alone.
struct IdealTerm {
  std::uint64_t value = 0;
  std::vector<std::uint64_t> trace;  // h_0 inputs queried
};

inline IdealTerm ideal_subversion(const Subverter& sub, const ValueSource& ds, std::uint64_t x, unsigned i) {
  if (i == 0) throw ConfigError("ideal subversion is defined for i >= 1");
  SourceAccess a(ds);
  EvalTrace t = subverted_eval(sub, a, i, x);
  IdealTerm out{t.value, {}};
  for (const auto& e : t.queries)
    if (e.point.index == 0) out.trace.push_back(e.point.payload);
  return out;
}

/// I(x) and Tr(x) for a whole constellation.
inline IdealTerm ideal_constellation(const Subverter& sub, const ValueSource& ds, const PublicRandomness& R,
                                     std::uint64_t x) {
  IdealTerm out;
  for (unsigned i = 1; i <= ds.params().ell; ++i) {
    IdealTerm t = ideal_subversion(sub, ds, x ^ R.at(i), i);
    out.value ^= t.value;
    out.trace.insert(out.trace.end(), t.trace.begin(), t.trace.end());
  }
  return out;
}

enum class ManyKind { random_list, leaked_R };

struct ExpManyResult {
  bool output = false;
  Witness witness;   // (x, h_0) hitting g~ of a listed anchor
  bool crossref = false;
  std::size_t terms = 0;
};

/// Exp-Many: M sees the data sets (and R only for leaked_R), publishes
/// `terms` queries; R is then drawn and G4 is run on the list.
inline ExpManyResult run_exp_many(ManyKind kind, unsigned terms, SubverterPtr sub, const Params& base,
                                  std::uint64_t seed) {
  Params p = base;
  p.seed = derive_seed(seed, Stream::trial, 0xD5);
  auto ds = std::make_shared<DataSets>(p);
  const PublicRandomness R = sample_R(p, derive_seed(seed, Stream::randomness, 0xE5));
  KeyedRng coins(derive_seed(seed, Stream::coins, 0xA1));
  std::vector<LoggedQuery> list;
  if (kind == ManyKind::random_list) {
    for (unsigned t = 0; t < terms; ++t) {
      if (t % 2 == 0) list.push_back({0, coins.bits(p.wide())});
      else list.push_back({1 + static_cast<unsigned>(coins.below(p.ell)), coins.bits(p.n)});
    }
  } else {
    const std::uint64_t y = coins.bits(p.n);
    const std::uint64_t g = ideal_constellation(*sub, *ds, R, y ^ R.at(1)).value;
    list = {{0, g}, {1, y}};
  }
  Simulator S(ds, R, sub);
  std::vector<std::uint64_t> h0s;
  std::vector<std::uint64_t> anchors;
  for (const auto& q : list) {
    (void)S.sim_query(q.i, q.x);
    if (q.i == 0) h0s.push_back(q.x);
    else anchors.push_back(q.x ^ R.at(q.i));
  }
  ExpManyResult r;
  r.terms = list.size();
  for (auto a : anchors) {
    const std::uint64_t g = S.engine().completion(a)->g;
    for (auto x : h0s)
      if (x == g && !r.output) {
        r.output = true;
        r.witness = {true, 0, a, g};
      }
    if (ideal_constellation(*sub, *ds, R, a).value != g) r.crossref = true;
  }
  return r;
}

enum class OneKind { fixed_guess, degenerate_leak };

/// Exp-One: M' publishes ((x, h_i), y) from the data sets; 1 iff the single
/// query's anchor x ^ r_i has g~ equal to y.
inline bool run_exp_one(OneKind kind, SubverterPtr sub, const Params& base, std::uint64_t seed) {
  Params p = base;
  p.seed = derive_seed(seed, Stream::trial, 0xD1);
  auto ds = std::make_shared<DataSets>(p);
  KeyedRng coins(derive_seed(seed, Stream::coins, 0xA2));
  unsigned i = 1;
  std::uint64_t x = coins.bits(p.n), y = 0;
  if (kind == OneKind::fixed_guess) {
    i = 1 + static_cast<unsigned>(coins.below(p.ell));
    y = coins.bits(p.wide());
  } else {
    if (p.ell != 1) throw ConfigError("the degenerate leak needs ell = 1");
    // with one term, g~(x ^ r_1) = h~_1(x) whatever R turns out to be
    y = ideal_subversion(*sub, *ds, x, 1).value;
  }
  const PublicRandomness R = sample_R(p, derive_seed(seed, Stream::randomness, 0xE1));
  Simulator S(ds, R, sub);
  (void)S.sim_query(i, x);
  return S.engine().completion(x ^ R.at(i))->g == y;
}

}  // namespace crko
