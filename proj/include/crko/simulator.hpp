#pragma once

// Lazily maintained oracle tables with constellation completion. One engine
// serves three rule sets: the table-backed clean construction (F follows h_0),
// the programmed hybrid (h_0 follows F, and F queries complete constellations),
// and the abbreviated simulator S (only h_i queries complete). The full-model
// simulator S_F wraps the last one with a raw first phase and a replay.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "crko/bits.hpp"
#include "crko/construction.hpp"
#include "crko/oracle.hpp"
#include "crko/subversion.hpp"

namespace crko {

/// Fresh values for lazily assigned cells.
class ValueSource {
 public:
  virtual ~ValueSource() = default;
  virtual const Params& params() const = 0;
  /// Sliced value of h_i(x): n bits for i = 0, 3n bits otherwise.
  virtual std::uint64_t h(unsigned i, std::uint64_t x) const = 0;
  virtual std::uint64_t F(std::uint64_t x) const = 0;
  virtual bool has_F() const { return true; }
};

/// Fresh values read straight from one truth table. No ideal F.
class TableSource final : public ValueSource {
 public:
  explicit TableSource(OracleTable t) : t_(std::move(t)) {}
  const Params& params() const override { return t_.params(); }
  std::uint64_t h(unsigned i, std::uint64_t x) const override { return t_.value(i, x); }
  std::uint64_t F(std::uint64_t) const override { throw InvariantBreach("table source has no ideal function"); }
  bool has_F() const override { return false; }
  const OracleTable& table() const { return t_; }

 private:
  OracleTable t_;
};

/// The a-priori data sets: DS1 holds F and h_i (i > 0), DS2 holds h_0.
/// h_i and h_0 reuse the truth table of the same seed so that games over
/// tables and games over data sets share coins; F has its own stream.
class DataSets final : public ValueSource {
 public:
  explicit DataSets(const Params& p) : table_(p), f_key_(derive_seed(p.seed, Stream::function, 0)) {}

  /// Same values, held in memory. Needs 2^{n'} cells under the cap.
  DataSets materialized() const {
    DataSets d = *this;
    d.table_ = table_.materialize();
    auto f = std::make_shared<std::vector<std::uint64_t>>(std::size_t{1} << params().n);
    for (std::uint64_t x = 0; x < f->size(); ++x) (*f)[x] = stream_F(x);
    d.f_dense_ = std::move(f);
    return d;
  }

  const Params& params() const override { return table_.params(); }
  std::uint64_t h(unsigned i, std::uint64_t x) const override { return table_.value(i, x); }
  std::uint64_t F(std::uint64_t x) const override {
    if (!fits(x, params().n)) throw ConfigError("F takes n-bit inputs");
    return f_dense_ ? (*f_dense_)[x] : stream_F(x);
  }
  const OracleTable& table() const { return table_; }
  bool materialized_mode() const { return f_dense_ != nullptr; }

 private:
  std::uint64_t stream_F(std::uint64_t x) const { return keyed(f_key_, x) & mask(params().n); }

  OracleTable table_;
  std::uint64_t f_key_;
  std::shared_ptr<const std::vector<std::uint64_t>> f_dense_;
};

/// Oracle access that reads a data set directly: h_0 from DS2, h_i from DS1.
class SourceAccess final : public OracleAccess {
 public:
  explicit SourceAccess(const ValueSource& s) : s_(&s) {}
  const Params& params() const override { return s_->params(); }
  std::uint64_t h(unsigned j, std::uint64_t y) override { return s_->h(j, y); }

 private:
  const ValueSource* s_;
};

struct Witness {
  bool fired = false;
  std::size_t step = 0;        // transcript position when it fired
  std::uint64_t anchor = 0;    // constellation x
  std::uint64_t point = 0;     // h_0 input y involved

  friend bool operator==(const Witness&, const Witness&) = default;
};

struct CrisisFlags {
  Witness pred, subv, selfref, forwardpred, backwardpred, conflict, crossref;

  static void fire(Witness& w, std::size_t step, std::uint64_t anchor, std::uint64_t point) {
    if (w.fired) return;
    w = {true, step, anchor, point};
  }
  bool any_indiff() const {
    return pred.fired || subv.fired || selfref.fired || forwardpred.fired || backwardpred.fired;
  }
  void merge(const CrisisFlags& o) {
    auto m = [](Witness& a, const Witness& b) {
      if (!a.fired && b.fired) a = b;
    };
    m(pred, o.pred);
    m(subv, o.subv);
    m(selfref, o.selfref);
    m(forwardpred, o.forwardpred);
    m(backwardpred, o.backwardpred);
    m(conflict, o.conflict);
    m(crossref, o.crossref);
  }
};

inline nlohmann::json to_json(const Witness& w) {
  if (!w.fired) return {{"fired", false}};
  return {{"fired", true}, {"step", w.step}, {"anchor", to_hex(w.anchor)}, {"point", to_hex(w.point)}};
}

inline nlohmann::json to_json(const CrisisFlags& f) {
  return {{"pred", to_json(f.pred)},
          {"subv", to_json(f.subv)},
          {"selfref", to_json(f.selfref)},
          {"forwardpred", to_json(f.forwardpred)},
          {"backwardpred", to_json(f.backwardpred)},
          {"conflict", to_json(f.conflict)},
          {"crossref", to_json(f.crossref)}};
}

enum class Regime {
  clean,       // F(x) := h_0(g~(x)); fresh values from a truth table
  programmed,  // h_0(g~(x)) := F(x); F queries complete constellations
  simulator,   // F queries are answered by F alone; h_i queries complete
};

enum class Tag { free, programmed };

struct Cell {
  std::uint64_t value = 0;
  Tag tag = Tag::free;
  std::uint64_t origin = 0;  // anchor that programmed it
};

struct Completion {
  std::uint64_t g = 0;
  std::vector<TraceEntry> trace;
  bool h0_preassigned = false;  // h_0(g) was in T_H before the completion began
  bool h0_self_queried = false; // completion itself evaluated h_0(g)
};

struct EngineOptions {
  bool return_constellation = false;  // S also hands back the whole constellation
  bool detect_subv = false;           // needs the full table behind a TableSource
  bool keep_log = false;
};

/// Lazy T_H / T_F with completion. Single-threaded; one instance per session.
class LazyEngine {
 public:
  LazyEngine(Regime regime, std::shared_ptr<const ValueSource> source, PublicRandomness R, SubverterPtr sub,
             EngineOptions opt = {})
      : regime_(regime), src_(std::move(source)), p_(src_->params()), R_(std::move(R)), sub_(std::move(sub)), opt_(opt) {
    check_randomness(p_, R_);
    if (regime_ != Regime::clean && !src_->has_F()) throw ConfigError("this regime needs an ideal function");
    if (opt_.detect_subv && dynamic_cast<const TableSource*>(src_.get()) == nullptr)
      throw ConfigError("subverted-area detection needs a table source");
  }

  const Params& params() const noexcept { return p_; }
  const PublicRandomness& randomness() const noexcept { return R_; }
  const Subverter& subverter() const noexcept { return *sub_; }
  Regime regime() const noexcept { return regime_; }
  const CrisisFlags& flags() const noexcept { return flags_; }
  CrisisFlags& flags() noexcept { return flags_; }
  void set_step(std::size_t s) noexcept { step_ = s; }

  /// Distinguisher query to h_i.
  std::uint64_t query_h(unsigned i, std::uint64_t x) {
    (void)embed(p_, i, x);
    touches_ = 0;
    std::uint64_t v;
    if (i == 0) {
      v = cell(0, x);
    } else {
      const std::uint64_t a = x ^ R_.at(i);
      d_constellations_.insert(a);
      (void)cell(i, x);
      const Completion& c = complete(a);
      if (opt_.detect_subv && d_subv_checked_.insert(a).second) check_subv(a, c.g);
      v = th_.at(flat(p_, {i, x})).value;
    }
    last_touches_ = touches_;
    log_query("h" + std::to_string(i), flat(p_, {i, x}), v);
    return v;
  }

  /// Distinguisher query to the F-side oracle.
  std::uint64_t query_F(std::uint64_t x) {
    if (!fits(x, p_.n)) throw ConfigError("F takes n-bit inputs");
    touches_ = 0;
    d_f_queries_.insert(x);
    std::uint64_t v;
    switch (regime_) {
      case Regime::clean:
        if (!tf_.contains(x)) (void)complete(x);
        v = tf_.at(x);
        break;
      case Regime::programmed:
        if (!tf_.contains(x)) {
          tf_[x] = src_->F(x);
          (void)complete(x);
        }
        v = tf_.at(x);
        break;
      case Regime::simulator:
      default:
        v = src_->F(x);
        tf_.try_emplace(x, v);
        break;
    }
    last_touches_ = touches_;
    log_query("F", x, v);
    return v;
  }

  /// Completes the constellation of `a` (idempotent) and settles h_0 / F.
  const Completion& complete(std::uint64_t a) {
    if (auto it = completed_.find(a); it != completed_.end()) return it->second;
    std::vector<std::uint64_t> fresh;
    fresh_ = &fresh;
    struct Reset {
      std::vector<std::uint64_t>** slot;
      ~Reset() { *slot = nullptr; }
    } reset{&fresh_};

    for (unsigned j = 1; j <= p_.ell; ++j) (void)cell(j, a ^ R_.at(j));
    Completion c;
    Internal access(*this);
    for (unsigned j = 1; j <= p_.ell; ++j) {
      EvalTrace t = subverted_eval(*sub_, access, j, a ^ R_.at(j));
      c.g ^= t.value;
      c.trace.insert(c.trace.end(), t.queries.begin(), t.queries.end());
    }
    const std::uint64_t k0 = flat(p_, {0, c.g});
    const bool assigned_now = th_.contains(k0);
    bool fresh_here = false;
    for (auto k : fresh) fresh_here |= k == k0;
    c.h0_preassigned = assigned_now && !fresh_here;
    for (const auto& e : c.trace) c.h0_self_queried |= e.point == OraclePoint{0, c.g};

    switch (regime_) {
      case Regime::clean:
        if (c.h0_preassigned) CrisisFlags::fire(flags_.pred, step_, a, c.g);
        if (c.h0_self_queried) CrisisFlags::fire(flags_.selfref, step_, a, c.g);
        break;
      case Regime::programmed:
      case Regime::simulator:
        if (assigned_now) CrisisFlags::fire(flags_.forwardpred, step_, a, c.g);
        if (c.h0_self_queried) CrisisFlags::fire(flags_.selfref, step_, a, c.g);
        if (regime_ == Regime::programmed && pending(a) && c.h0_self_queried)
          CrisisFlags::fire(flags_.backwardpred, step_, a, c.g);
        break;
    }
    fresh_ = nullptr;

    // h_0 at g~(a), and F(a)
    switch (regime_) {
      case Regime::clean: {
        const std::uint64_t y = cell(0, c.g);
        if (auto it = tf_.find(a); it == tf_.end()) tf_[a] = y;
        else if (it->second != y) collisions_.push_back({a, c.g});
        break;
      }
      case Regime::programmed: {
        if (!tf_.contains(a)) tf_[a] = src_->F(a);
        program(c.g, tf_.at(a), a);
        break;
      }
      case Regime::simulator:
        if (!th_.contains(k0)) program(c.g, src_->F(a), a);
        break;
    }
    auto [pos, inserted] = completed_.emplace(a, std::move(c));
    (void)inserted;
    g_index_.emplace(pos->second.g, a);
    return pos->second;
  }

  /// All ell constellation values of a completed anchor, in index order.
  std::vector<std::pair<OraclePoint, std::uint64_t>> constellation_values(std::uint64_t a) const {
    std::vector<std::pair<OraclePoint, std::uint64_t>> out;
    for (unsigned j = 1; j <= p_.ell; ++j) {
      const OraclePoint z{j, a ^ R_.at(j)};
      out.emplace_back(z, th_.at(flat(p_, z)).value);
    }
    return out;
  }

  bool is_completed(std::uint64_t a) const { return completed_.contains(a); }
  const Completion* completion(std::uint64_t a) const {
    auto it = completed_.find(a);
    return it == completed_.end() ? nullptr : &it->second;
  }
  const std::unordered_map<std::uint64_t, Completion>& completions() const { return completed_; }
  const std::unordered_map<std::uint64_t, Cell>& th() const { return th_; }
  const std::unordered_map<std::uint64_t, std::uint64_t>& tf() const { return tf_; }
  const std::set<std::uint64_t>& f_queries() const { return d_f_queries_; }
  const std::set<std::uint64_t>& queried_constellations() const { return d_constellations_; }
  const std::vector<std::pair<std::uint64_t, std::uint64_t>>& tf_collisions() const { return collisions_; }
  std::size_t last_touches() const noexcept { return last_touches_; }
  const std::vector<nlohmann::json>& log() const { return log_; }
  /// Every h_0 input this engine has seen queried inside a subverted evaluation.
  const std::vector<std::uint64_t>& internal_h0_queries() const { return internal_h0_; }

  std::optional<Cell> lookup(OraclePoint z) const {
    auto it = th_.find(flat(p_, z));
    if (it == th_.end()) return std::nullopt;
    return it->second;
  }

  /// Checks that every programmed cell equals F at its origin anchor and that
  /// every completed constellation is fully present.
  void audit() const {
    for (const auto& [k, c] : th_) {
      if (c.tag != Tag::programmed) continue;
      auto it = tf_.find(c.origin);
      const std::uint64_t f = regime_ == Regime::simulator ? src_->F(c.origin) : (it == tf_.end() ? ~0ULL : it->second);
      if (f != c.value) throw InvariantBreach("programmed cell disagrees with F at its anchor");
    }
    for (const auto& [a, c] : completed_)
      for (unsigned j = 1; j <= p_.ell; ++j)
        if (!th_.contains(flat(p_, {j, a ^ R_.at(j)}))) throw InvariantBreach("completed constellation has a hole");
  }

 private:
  class Internal final : public OracleAccess {
   public:
    explicit Internal(LazyEngine& e) : e_(&e) {}
    const Params& params() const override { return e_->p_; }
    std::uint64_t h(unsigned j, std::uint64_t y) override {
      if (j == 0) e_->internal_h0_.push_back(y);
      return e_->cell(j, y);
    }

   private:
    LazyEngine* e_;
  };

  bool pending(std::uint64_t a) const { return d_f_queries_.contains(a) && !d_constellations_.contains(a); }

  // Cache-or-fresh; never triggers completion.
  std::uint64_t cell(unsigned i, std::uint64_t x) {
    ++touches_;
    const std::uint64_t k = flat(p_, {i, x});
    if (i == 0 && regime_ == Regime::programmed) check_backward(x);
    if (auto it = th_.find(k); it != th_.end()) return it->second.value;
    const std::uint64_t v = src_->h(i, x);
    th_.emplace(k, Cell{v, Tag::free, 0});
    if (fresh_) fresh_->push_back(k);
    return v;
  }

  void program(std::uint64_t y, std::uint64_t value, std::uint64_t anchor) {
    const std::uint64_t k = flat(p_, {0, y});
    if (th_.contains(k)) return;  // already assigned: left alone
    th_.emplace(k, Cell{value, Tag::programmed, anchor});
  }

  void check_backward(std::uint64_t y) {
    auto [lo, hi] = g_index_.equal_range(y);
    for (auto it = lo; it != hi; ++it)
      if (pending(it->second)) CrisisFlags::fire(flags_.backwardpred, step_, it->second, y);
  }

  void check_subv(std::uint64_t a, std::uint64_t g) {
    const auto& t = static_cast<const TableSource&>(*src_).table();
    if (subverted_eval(*sub_, t, 0, g).value != t.value(0, g)) CrisisFlags::fire(flags_.subv, step_, a, g);
  }

  void log_query(const std::string& target, std::uint64_t input, std::uint64_t value) {
    if (!opt_.keep_log) return;
    nlohmann::json rec{{"step", step_}, {"target", target}, {"input", to_hex(input)}, {"value", to_hex(value)}};
    nlohmann::json fired = nlohmann::json::array();
    auto add = [&](const char* name, const Witness& w) {
      if (w.fired && w.step == step_) fired.push_back(name);
    };
    add("pred", flags_.pred);
    add("subv", flags_.subv);
    add("selfref", flags_.selfref);
    add("forwardpred", flags_.forwardpred);
    add("backwardpred", flags_.backwardpred);
    rec["events"] = fired;
    if (target == "h0") {
      const auto& c = th_.at(input);
      rec["tag"] = c.tag == Tag::programmed ? "programmed" : "free";
    }
    log_.push_back(std::move(rec));
  }

  Regime regime_;
  std::shared_ptr<const ValueSource> src_;
  Params p_;
  PublicRandomness R_;
  SubverterPtr sub_;
  EngineOptions opt_;

  std::unordered_map<std::uint64_t, Cell> th_;
  std::unordered_map<std::uint64_t, std::uint64_t> tf_;
  std::unordered_map<std::uint64_t, Completion> completed_;
  std::unordered_multimap<std::uint64_t, std::uint64_t> g_index_;
  std::set<std::uint64_t> d_f_queries_;
  std::set<std::uint64_t> d_constellations_;
  std::unordered_set<std::uint64_t> d_subv_checked_;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> collisions_;
  std::vector<std::uint64_t> internal_h0_;
  std::vector<std::uint64_t>* fresh_ = nullptr;
  CrisisFlags flags_;
  std::size_t step_ = 0;
  std::size_t touches_ = 0;
  std::size_t last_touches_ = 0;
  std::vector<nlohmann::json> log_;
};

/// The abbreviated simulator S over the a-priori data sets.
class Simulator {
 public:
  Simulator(std::shared_ptr<const ValueSource> ds, PublicRandomness R, SubverterPtr sub, EngineOptions opt = {})
      : engine_(Regime::simulator, std::move(ds), std::move(R), std::move(sub), opt) {}

  std::uint64_t sim_query(unsigned i, std::uint64_t x) { return engine_.query_h(i, x); }
  std::uint64_t F(std::uint64_t x) { return engine_.query_F(x); }
  std::uint64_t complete_constellation(std::uint64_t x) { return engine_.complete(x).g; }

  /// With the convenience convention on, the whole constellation of x ^ r_i.
  std::vector<std::pair<OraclePoint, std::uint64_t>> sim_query_all(unsigned i, std::uint64_t x) {
    if (i == 0) throw ConfigError("constellations belong to h_i with i > 0");
    (void)sim_query(i, x);
    return engine_.constellation_values(x ^ engine_.randomness().at(i));
  }

  LazyEngine& engine() noexcept { return engine_; }
  const LazyEngine& engine() const noexcept { return engine_; }

 private:
  LazyEngine engine_;
};

enum class FullPhase { one, replay, two };

struct LoggedQuery {
  unsigned i = 0;
  std::uint64_t x = 0;
  friend bool operator==(const LoggedQuery&, const LoggedQuery&) = default;
};

/// S_F: raw answers until R arrives, then replay through S and abort on Conflict.
class FullSimulator {
 public:
  explicit FullSimulator(std::shared_ptr<const DataSets> ds, EngineOptions opt = {}) : ds_(std::move(ds)), opt_(opt) {}

  FullPhase phase() const noexcept { return phase_; }
  bool aborted() const noexcept { return aborted_; }
  const std::vector<LoggedQuery>& phase_one_log() const { return log_; }
  const Witness& conflict() const { return conflict_; }

  /// Answer to h_i(x); nullopt is the abort signal.
  std::optional<std::uint64_t> query(unsigned i, std::uint64_t x) {
    (void)embed(ds_->params(), i, x);
    if (aborted_) return std::nullopt;
    if (phase_ == FullPhase::one) {
      log_.push_back({i, x});
      return ds_->h(i, x);
    }
    return sim_->sim_query(i, x);
  }

  /// Hands over (R, H~). Replays the phase-one log; returns false on abort.
  bool receive(const PublicRandomness& R, SubverterPtr sub) {
    if (phase_ != FullPhase::one) throw ConfigError("randomness already received");
    phase_ = FullPhase::replay;
    sim_.emplace(ds_, R, std::move(sub), opt_);
    std::vector<std::uint64_t> h0_inputs;
    std::vector<std::uint64_t> anchors;
    for (const auto& q : log_) {
      (void)sim_->sim_query(q.i, q.x);
      if (q.i == 0) h0_inputs.push_back(q.x);
      else anchors.push_back(q.x ^ R.at(q.i));
    }
    const auto& internal = sim_->engine().internal_h0_queries();
    h0_inputs.insert(h0_inputs.end(), internal.begin(), internal.end());
    std::unordered_set<std::uint64_t> hits(h0_inputs.begin(), h0_inputs.end());
    for (auto a : anchors) {
      const std::uint64_t g = sim_->engine().completion(a)->g;
      if (hits.contains(g)) {
        aborted_ = true;
        conflict_ = {true, log_.size(), a, g};
        break;
      }
    }
    phase_ = FullPhase::two;
    return !aborted_;
  }

  Simulator& simulator() {
    if (!sim_) throw ConfigError("simulator not started");
    return *sim_;
  }

 private:
  std::shared_ptr<const DataSets> ds_;
  EngineOptions opt_;
  FullPhase phase_ = FullPhase::one;
  std::vector<LoggedQuery> log_;
  std::optional<Simulator> sim_;
  bool aborted_ = false;
  Witness conflict_;
};

}  // namespace crko
