// crko: batch front end for the library. Every subcommand resolves a JSON
// config (file, then flags, then defaults), runs it and writes
// <out>/<command>.csv plus a <out>/<command>.json sidecar.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "crko/crko.hpp"

using namespace crko;
using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::optional<unsigned> n, ell, workers, q, k, seeds, n_min, n_max, ell_offset, terms;
  std::optional<std::uint64_t> trials, seed, samples;
  std::optional<std::string> out, attack, variant, subverter, z, target, key, distinguisher, construction, mode,
      metric;
  std::optional<double> eps;
  std::optional<unsigned> cap;
  bool unsafe = false;
};

// file values first, flags override, defaults fill the rest
class Resolver {
 public:
  Resolver(std::string cmd, const Flags& f) : f_(f) {
    if (!f.config.empty()) cfg_ = load_json(f.config);
    if (!cfg_.is_object()) throw ConfigError("config must be a JSON object");
    if (cfg_.contains("command") && cfg_.at("command") != cmd)
      throw ConfigError("config is for '" + cfg_.at("command").get<std::string>() + "', not '" + cmd + "'");
    cfg_["command"] = cmd;
  }

  template <class T>
  T get(const std::string& key, const std::optional<T>& flag, T fallback) {
    if (flag) cfg_[key] = *flag;
    else if (!cfg_.contains(key)) cfg_[key] = fallback;
    try {
      return cfg_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config field '" + key + "' has the wrong type");
    }
  }

  Params params(unsigned n_def, std::optional<unsigned> ell_def = {}) {
    const unsigned n = get<unsigned>("n", f_.n, n_def);
    const unsigned ell = get<unsigned>("ell", f_.ell, ell_def.value_or(n + 5));
    const std::uint64_t seed = get<std::uint64_t>("seed", f_.seed, 1);
    const bool unsafe = f_.unsafe || cfg_.value("unsafe_params", false);
    Params p = derive_params(n, ell, seed);
    if (p.unsafe && !unsafe)
      throw ConfigError("ell=" + std::to_string(ell) + " <= n+4=" + std::to_string(n + 4) + " needs --unsafe-params");
    cfg_["unsafe_params"] = p.unsafe;
    return p;
  }

  SubverterSpec subverter(SubverterSpec fallback) {
    json j = cfg_.contains("subverter") ? cfg_.at("subverter") : to_json(fallback);
    if (f_.subverter) j = json{{"kind", *f_.subverter}};
    if (f_.z) j["z"] = *f_.z;
    if (f_.k) j["k"] = *f_.k;
    if (f_.target) j["target"] = *f_.target == "all" ? json("all") : json(std::stoi(*f_.target));
    if (f_.key) j["key"] = *f_.key;
    const SubverterSpec s = subverter_spec_from_json(j);
    cfg_["subverter"] = to_json(s);
    return s;
  }

  DistinguisherSpec distinguisher(DistinguisherSpec fallback) {
    json j = cfg_.contains("distinguisher") ? cfg_.at("distinguisher") : to_json(fallback);
    if (f_.distinguisher) j = json{{"kind", *f_.distinguisher}};
    if (f_.q) j["q"] = *f_.q;
    const DistinguisherSpec d = distinguisher_spec_from_json(j);
    cfg_["distinguisher"] = to_json(d);
    return d;
  }

  const json& config() const { return cfg_; }

 private:
  const Flags& f_;
  json cfg_ = json::object();
};

struct Output {
  std::filesystem::path dir;
  std::string name;
  json cfg;
  json summary = json::object();

  std::string hash() const { return config_hash(cfg); }
  bool unsafe() const { return cfg.value("unsafe_params", false); }

  void save(const CsvWriter& csv) const {
    csv.save(dir / (name + ".csv"));
    save_json(dir / (name + ".json"),
              {{"config_hash", hash()}, {"unsafe_params", unsafe()}, {"config", cfg}, {"summary", summary}});
  }
};

std::string b(bool v) { return v ? "1" : "0"; }

json prop_json(const Proportion& p) {
  return {{"hits", p.hits}, {"total", p.total}, {"rate", p.estimate}, {"lo", p.lo}, {"hi", p.hi}};
}

unsigned workers_of(const Flags& f) { return f.workers.value_or(default_workers()); }

// ---------------------------------------------------------------- commands

void cmd_demo(const Flags& f, Output& out) {
  Resolver r("demo", f);
  const std::string attack = r.get<std::string>("attack", f.attack, "peel-single");
  const Params p = r.params(8, 13);
  const std::uint64_t trials = r.get<std::uint64_t>("trials", f.trials, 1000);
  SubverterSpec ss;
  DistinguisherSpec ds;
  std::vector<std::pair<std::string, Construction>> arms;
  if (attack == "peel-single") {
    ss.kind = SubverterKind::peel_single;
    ss.z = 0x5A & mask(p.n);
    ds.kind = DistinguisherKind::peel_single_attack;
    arms = {{"broken_single", Construction::broken_single}, {"full", Construction::full}};
  } else if (attack == "peel-split") {
    ss.kind = SubverterKind::peel_split;
    ss.z = 0x5 & mask(p.n / 2);
    ds.kind = DistinguisherKind::peel_split_attack;
    arms = {{"broken_pair", Construction::broken_pair}, {"full", Construction::full}};
  } else if (attack == "trigger") {
    ss.kind = SubverterKind::prefix_trigger;
    ss.k = std::min(4U, p.wide());
    ds.kind = DistinguisherKind::trigger_attack;
    arms = {{"full", Construction::full}};
  } else {
    throw ConfigError("unknown attack '" + attack + "' (peel-single, peel-split, trigger)");
  }
  ss = r.subverter(ss);
  ds.m = ss.z;
  ds.z = ss.z;
  ds.k = ss.k;
  auto sub = make_subverter(ss, p);
  auto D = make_distinguisher(ds, sub, p);
  out.cfg = r.config();
  CsvWriter csv({"construction", "real_rate", "ideal_rate", "advantage", "ci_lo", "ci_hi"}, out.hash(), out.unsafe());
  std::cout << "attack " << attack << " n=" << p.n << " ell=" << p.ell << " trials=" << trials << '\n';
  std::cout << "construction    advantage   95% CI\n";
  for (const auto& [name, c] : arms) {
    const AdvantageReport a = estimate_advantage(*D, sub, p, trials, p.seed, workers_of(f), c);
    csv.row({name, fmt(a.real.estimate), fmt(a.ideal.estimate), fmt(a.advantage), fmt(a.lo), fmt(a.hi)});
    out.summary[name] = {{"advantage", a.advantage}, {"lo", a.lo}, {"hi", a.hi}};
    std::cout << name << std::string(16 - std::min<std::size_t>(15, name.size()), ' ') << fmt(a.advantage, 4)
              << "      [" << fmt(a.lo, 4) << ", " << fmt(a.hi, 4) << "]\n";
  }
  out.save(csv);
}

void cmd_game(const Flags& f, Output& out) {
  Resolver r("game", f);
  const std::string variant = r.get<std::string>("variant", f.variant, "pairwise-equality");
  const Params p = r.params(4, 9);
  const unsigned seeds = r.get<unsigned>("seeds", f.seeds, 100);
  auto sub = make_subverter(r.subverter({}), p);
  DistinguisherSpec dd;
  dd.kind = DistinguisherKind::random_probe;
  auto D = make_distinguisher(r.distinguisher(dd), sub, p);
  out.cfg = r.config();
  if (variant == "pairwise-equality") {
    CsvWriter csv({"pair", "matches", "total"}, out.hash(), out.unsafe());
    const std::pair<GameVariant, GameVariant> pairs[] = {{GameVariant::G2_1, GameVariant::G2_2},
                                                         {GameVariant::G3_1, GameVariant::G3_2}};
    for (const auto& [a, bv] : pairs) {
      auto same = parallel_map(seeds, workers_of(f), [&](std::uint64_t t) -> std::uint8_t {
        const TrialSetup s = trial_setup(p, p.seed, t);
        return run_game(a, *D, sub, s.params, s.seeds).transcript == run_game(bv, *D, sub, s.params, s.seeds).transcript;
      });
      unsigned m = 0;
      for (auto v : same) m += v;
      const std::string name = variant_name(a) + "==" + variant_name(bv);
      csv.row({name, std::to_string(m), std::to_string(seeds)});
      out.summary[name] = {{"matches", m}, {"total", seeds}};
      std::cout << name << ": " << m << "/" << seeds << " exact transcript matches\n";
    }
    out.save(csv);
    return;
  }
  const GameVariant v = parse_variant(variant);
  CsvWriter csv({"trial", "decision", "entries", "repairs", "pred", "subv", "selfref", "forwardpred", "backwardpred"},
                out.hash(), out.unsafe());
  auto runs = parallel_map(seeds, workers_of(f), [&](std::uint64_t t) {
    const TrialSetup s = trial_setup(p, p.seed, t);
    return run_game(v, *D, sub, s.params, s.seeds);
  });
  unsigned ones = 0;
  for (std::size_t t = 0; t < runs.size(); ++t) {
    const GameResult& g = runs[t];
    ones += g.decision;
    csv.row({std::to_string(t), b(g.decision), std::to_string(g.transcript.entries.size()),
             std::to_string(g.repairs.size()), b(g.flags.pred.fired), b(g.flags.subv.fired), b(g.flags.selfref.fired),
             b(g.flags.forwardpred.fired), b(g.flags.backwardpred.fired)});
  }
  out.summary = {{"variant", variant}, {"ones", ones}, {"total", seeds}};
  std::cout << variant << ": " << ones << "/" << seeds << " sessions output 1\n";
  out.save(csv);
}

void cmd_advantage(const Flags& f, Output& out) {
  Resolver r("advantage", f);
  const Params p = r.params(4, 9);
  const std::uint64_t trials = r.get<std::uint64_t>("trials", f.trials, 1000);
  const std::string cons = r.get<std::string>("construction", f.construction, "full");
  Construction c;
  if (cons == "full") c = Construction::full;
  else if (cons == "broken_single") c = Construction::broken_single;
  else if (cons == "broken_pair") c = Construction::broken_pair;
  else throw ConfigError("unknown construction '" + cons + "'");
  auto sub = make_subverter(r.subverter({}), p);
  DistinguisherSpec dd;
  dd.kind = DistinguisherKind::consistency_check;
  auto D = make_distinguisher(r.distinguisher(dd), sub, p);
  out.cfg = r.config();
  const AdvantageReport a = estimate_advantage(*D, sub, p, trials, p.seed, workers_of(f), c);
  CsvWriter csv({"distinguisher", "subverter", "construction", "real_rate", "ideal_rate", "advantage", "ci_lo", "ci_hi"},
                out.hash(), out.unsafe());
  csv.row({D->label(), sub->label(), cons, fmt(a.real.estimate), fmt(a.ideal.estimate), fmt(a.advantage), fmt(a.lo),
           fmt(a.hi)});
  out.summary = {{"real", prop_json(a.real)}, {"ideal", prop_json(a.ideal)}, {"advantage", a.advantage},
                 {"lo", a.lo}, {"hi", a.hi}};
  std::cout << D->label() << " vs " << sub->label() << " (" << cons << "): advantage " << fmt(a.advantage, 4) << " ["
            << fmt(a.lo, 4) << ", " << fmt(a.hi, 4) << "]\n";
  out.save(csv);
}

void cmd_crises(const Flags& f, Output& out) {
  Resolver r("crises", f);
  const Params p = r.params(4, 9);
  const std::uint64_t trials = r.get<std::uint64_t>("trials", f.trials, 1000);
  auto sub = make_subverter(r.subverter({}), p);
  DistinguisherSpec dd;
  dd.kind = DistinguisherKind::random_probe;
  auto D = make_distinguisher(r.distinguisher(dd), sub, p);
  out.cfg = r.config();
  struct Row {
    std::uint8_t d14, d34, pred, subv, selfref, fp, bp, unexplained;
  };
  auto rows = parallel_map(trials, workers_of(f), [&](std::uint64_t t) {
    const LadderRun l = run_ladder(*D, sub, trial_setup(p, p.seed, t));
    return Row{l.g1_vs_g4_diverged, l.g32_vs_g4_diverged, l.g22.flags.pred.fired, l.g22.flags.subv.fired,
               l.g22.flags.selfref.fired, l.g32.flags.forwardpred.fired, l.g32.flags.backwardpred.fired,
               static_cast<std::uint8_t>(l.unexplained || l.g32_g4_unexplained)};
  });
  CsvWriter csv({"trial", "g1_vs_g4", "g32_vs_g4", "pred", "subv", "selfref", "forwardpred", "backwardpred",
                 "unexplained"},
                out.hash(), out.unsafe());
  std::uint64_t d14 = 0, d34 = 0, un = 0, pred = 0, subv = 0, self = 0, fp = 0, bp = 0;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const Row& x = rows[t];
    d14 += x.d14, d34 += x.d34, un += x.unexplained, pred += x.pred, subv += x.subv, self += x.selfref, fp += x.fp,
        bp += x.bp;
    csv.row({std::to_string(t), b(x.d14), b(x.d34), b(x.pred), b(x.subv), b(x.selfref), b(x.fp), b(x.bp),
             b(x.unexplained)});
  }
  out.summary = {{"trials", trials}, {"g1_vs_g4", d14}, {"g32_vs_g4", d34}, {"unexplained", un},
                 {"pred", pred},     {"subv", subv},    {"selfref", self},  {"forwardpred", fp},
                 {"backwardpred", bp}};
  std::cout << "crises: " << trials << " ladders, G1/G4 divergences " << d14 << ", G3.2/G4 divergences " << d34
            << ", unexplained " << un << '\n';
  out.save(csv);
  if (un > 0) throw InvariantBreach(std::to_string(un) + " divergences without a crisis flag");
}

void cmd_spectrum(const Flags& f, Output& out) {
  Resolver r("spectrum", f);
  const Params p = r.params(3, 8);
  const std::uint64_t samples = r.get<std::uint64_t>("samples", f.samples, 100);
  const SubverterSpec ss = r.subverter({});
  auto sub = make_subverter(ss, p);
  double eps = 0;
  if (f.eps || r.config().contains("eps")) {
    eps = r.get<double>("eps", f.eps, 0.0);
  } else {
    eps = epsilon_hat(estimate_epsilon(*sub, p, {.trials = 8, .workers = 1}));
    r.get<double>("eps", std::optional<double>(eps), eps);
  }
  out.cfg = r.config();
  auto reports = parallel_map(samples, workers_of(f), [&](std::uint64_t s) {
    Params ps = p;
    ps.seed = trial_seed(p.seed, s, 0);
    KeyedRng rng(trial_seed(p.seed, s, 1));
    const std::uint64_t rt = rng.bits(p.n), x = rng.bits(p.n);
    const SpectrumReport rep = g_tilde_spectrum(*sub, OracleTable(ps), 1, rt, x, eps);
    return std::array<double, 4>{rep.tv, rep.tv_bound, rep.threshold, rep.violates ? 1.0 : 0.0};
  });
  CsvWriter csv({"sample", "tv_exact", "tv_bound", "threshold", "violates"}, out.hash(), out.unsafe());
  unsigned viol = 0, bound_fail = 0;
  for (std::size_t s = 0; s < reports.size(); ++s) {
    const auto& v = reports[s];
    viol += v[3] > 0;
    bound_fail += v[1] + 1e-12 < v[0];
    csv.row({std::to_string(s), fmt(v[0], 12), fmt(v[1], 12), fmt(v[2], 12), b(v[3] > 0)});
  }
  out.summary = {{"samples", samples}, {"eps_hat", eps}, {"violations", viol}, {"bound_failures", bound_fail}};
  std::cout << "spectrum: " << samples << " tables, eps_hat=" << fmt(eps, 4) << ", threshold violations " << viol
            << ", Plancherel failures " << bound_fail << '\n';
  out.save(csv);
}

void cmd_classify(const Flags& f, Output& out) {
  Resolver r("classify", f);
  const Params p = r.params(3, 8);
  const std::string mode_s = r.get<std::string>("mode", f.mode, "all");
  const std::uint64_t samples = r.get<std::uint64_t>("samples", f.samples, 200);
  auto sub = make_subverter(r.subverter({}), p);
  const double eps = epsilon_hat(estimate_epsilon(*sub, p, {.trials = 8, .workers = 1}));
  out.cfg = r.config();
  std::vector<std::pair<std::string, TermMode>> modes;
  const std::pair<std::string, TermMode> all[] = {
      {"good", TermMode::good}, {"honest", TermMode::honest}, {"invisible", TermMode::invisible},
      {"silent", TermMode::silent}};
  for (const auto& m : all)
    if (mode_s == "all" || mode_s == m.first) modes.push_back(m);
  if (modes.empty()) throw ConfigError("unknown mode '" + mode_s + "'");
  const OracleTable table(p);
  const CallerIndex idx(*sub, table);
  ClassifyOptions opt{.samples = samples, .eps_hat = eps, .seed = p.seed, .index = &idx};
  CsvWriter csv({"i", "x", "mode", "verdict", "estimate", "ci_lo", "ci_hi", "threshold"}, out.hash(), out.unsafe());
  json counts = json::object();
  for (const auto& [name, m] : modes) {
    unsigned pass = 0, total = 0;
    for (unsigned i = 1; i <= p.ell; ++i)
      for (std::uint64_t x = 0; x <= mask(p.n); ++x) {
        const TermClass c = classify_term(*sub, table, i, x, m, opt);
        pass += c.verdict;
        ++total;
        csv.row({std::to_string(i), to_hex(x), name, b(c.verdict), fmt(c.estimate), fmt(c.ci_lo), fmt(c.ci_hi),
                 fmt(c.threshold)});
      }
    counts[name] = {{"pass", pass}, {"total", total}};
    std::cout << "classify " << name << ": " << pass << "/" << total << " terms pass\n";
  }
  out.summary = {{"eps_hat", eps}, {"modes", counts}};
  out.save(csv);
}

void cmd_selfref(const Flags& f, Output& out) {
  Resolver r("selfref", f);
  const Params p = r.params(4);
  const std::uint64_t trials = r.get<std::uint64_t>("trials", f.trials, 10000);
  SubverterSpec ss;
  ss.kind = SubverterKind::echo_probe;
  auto sub = make_subverter(r.subverter(ss), p);
  out.cfg = r.config();
  const Proportion pr = selfref_rate(*sub, p, trials, p.seed, workers_of(f));
  CsvWriter csv({"n", "ell", "hits", "trials", "rate", "ci_lo", "ci_hi"}, out.hash(), out.unsafe());
  csv.row({std::to_string(p.n), std::to_string(p.ell), std::to_string(pr.hits), std::to_string(trials),
           fmt(pr.estimate), fmt(pr.lo), fmt(pr.hi)});
  out.summary = prop_json(pr);
  std::cout << "selfref n=" << p.n << " ell=" << p.ell << ": " << pr.hits << "/" << trials << " = " << fmt(pr.estimate, 4)
            << '\n';
  out.save(csv);
}

Proportion exp_many_rate(ManyKind kind, unsigned terms, SubverterPtr sub, const Params& p, std::uint64_t trials,
                         unsigned workers) {
  auto hits = parallel_map(trials, workers, [&](std::uint64_t t) -> std::uint8_t {
    return run_exp_many(kind, terms, sub, p, trial_seed(p.seed, t, 0xE6)).output;
  });
  std::uint64_t h = 0;
  for (auto v : hits) h += v;
  return wilson(h, trials);
}

void cmd_expgames(const Flags& f, Output& out) {
  Resolver r("expgames", f);
  const Params p = r.params(4);
  const std::uint64_t trials = r.get<std::uint64_t>("trials", f.trials, 2000);
  const unsigned terms = r.get<unsigned>("terms", f.terms, 16);
  SubverterSpec ss;
  ss.kind = SubverterKind::echo_probe;
  auto sub = make_subverter(r.subverter(ss), p);
  out.cfg = r.config();
  CsvWriter csv({"experiment", "terms", "trials", "wins", "rate", "ci_lo", "ci_hi"}, out.hash(), out.unsafe());
  auto emit = [&](const std::string& name, unsigned t, const Proportion& pr) {
    csv.row({name, std::to_string(t), std::to_string(trials), std::to_string(pr.hits), fmt(pr.estimate), fmt(pr.lo),
             fmt(pr.hi)});
    out.summary[name] = prop_json(pr);
    std::cout << name << ": " << pr.hits << "/" << trials << " = " << fmt(pr.estimate, 4) << '\n';
  };
  emit("many_random_list", terms, exp_many_rate(ManyKind::random_list, terms, sub, p, trials, workers_of(f)));
  emit("many_leaked_R", 2, exp_many_rate(ManyKind::leaked_R, 2, sub, p, trials, workers_of(f)));
  auto one = [&](OneKind k) {
    auto hits = parallel_map(trials, workers_of(f), [&](std::uint64_t t) -> std::uint8_t {
      return run_exp_one(k, sub, p, trial_seed(p.seed, t, 0xE7));
    });
    std::uint64_t h = 0;
    for (auto v : hits) h += v;
    return wilson(h, trials);
  };
  emit("one_fixed_guess", 1, one(OneKind::fixed_guess));
  if (p.ell == 1) emit("one_degenerate_leak", 1, one(OneKind::degenerate_leak));
  out.save(csv);
}

void cmd_sweep(const Flags& f, Output& out) {
  Resolver r("sweep", f);
  const std::string metric = r.get<std::string>("metric", f.metric, "selfref");
  const unsigned lo = r.get<unsigned>("n_min", f.n_min, 3);
  const unsigned hi = r.get<unsigned>("n_max", f.n_max, 5);
  const unsigned off = r.get<unsigned>("ell_offset", f.ell_offset, 5);
  const std::uint64_t trials = r.get<std::uint64_t>("trials", f.trials, 10000);
  const std::uint64_t seed = r.get<std::uint64_t>("seed", f.seed, 1);
  const unsigned terms = r.get<unsigned>("terms", f.terms, 16);
  if (lo == 0 || hi < lo) throw ConfigError("need 1 <= n_min <= n_max");
  if (metric != "selfref" && metric != "expmany") throw ConfigError("unknown metric '" + metric + "'");
  SubverterSpec ss;
  ss.kind = SubverterKind::echo_probe;
  const SubverterSpec spec = r.subverter(ss);
  const bool unsafe_ok = f.unsafe || r.config().value("unsafe_params", false);
  bool any_unsafe = false;
  std::vector<Params> ps;
  for (unsigned n = lo; n <= hi; ++n) {
    const Params p = derive_params(n, n + off, seed);
    if (p.unsafe && !unsafe_ok) throw ConfigError("ell_offset <= 4 needs --unsafe-params");
    any_unsafe |= p.unsafe;
    ps.push_back(p);
  }
  json cfg = r.config();
  cfg["unsafe_params"] = any_unsafe;
  out.cfg = cfg;
  CsvWriter csv({"n", "ell", "metric", "hits", "trials", "rate", "ci_lo", "ci_hi"}, out.hash(), out.unsafe());
  json rows = json::array();
  for (const Params& p : ps) {
    auto sub = make_subverter(spec, p);
    const Proportion pr = metric == "selfref" ? selfref_rate(*sub, p, trials, p.seed, workers_of(f))
                                              : exp_many_rate(ManyKind::random_list, terms, sub, p, trials, workers_of(f));
    csv.row({std::to_string(p.n), std::to_string(p.ell), metric, std::to_string(pr.hits), std::to_string(trials),
             fmt(pr.estimate), fmt(pr.lo), fmt(pr.hi)});
    rows.push_back({{"n", p.n}, {"ell", p.ell}, {"rate", prop_json(pr)}});
    std::cout << metric << " n=" << p.n << " ell=" << p.ell << ": " << pr.hits << "/" << trials << " = "
              << fmt(pr.estimate, 4) << '\n';
  }
  out.summary = {{"metric", metric}, {"points", rows}};
  out.save(csv);
}

void cmd_export(const Flags& f, Output& out) {
  Resolver r("export-table", f);
  const Params p = r.params(3);
  out.cfg = r.config();
  require_cap(p.n_prime, enumeration_cap(), "table export");
  const OracleTable t = OracleTable(p).materialize();
  const PublicRandomness R = sample_R(p, trial_seed(p.seed, 0, 1));
  std::filesystem::create_directories(out.dir);
  {
    std::ofstream tf(out.dir / "table.bin", std::ios::binary);
    t.write_binary(tf);
    std::ofstream rf(out.dir / "R.bin", std::ios::binary);
    write_binary(rf, R);
  }
  CsvWriter csv({"file", "points", "bytes"}, out.hash(), out.unsafe());
  const std::uint64_t points = std::uint64_t{1} << p.n_prime;
  csv.row({"table.bin", std::to_string(points), std::to_string(std::filesystem::file_size(out.dir / "table.bin"))});
  csv.row({"R.bin", std::to_string(p.ell), std::to_string(std::filesystem::file_size(out.dir / "R.bin"))});
  out.summary = {{"n_prime", p.n_prime}, {"R", to_json(R)}};
  std::cout << "exported 2^" << p.n_prime << " points to " << (out.dir / "table.bin").string() << '\n';
  out.save(csv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crko: corrected random oracle experiments"};
  app.require_subcommand(1);
  Flags f;
  auto common = [&](CLI::App* c) {
    c->add_option("--config", f.config, "JSON config file");
    c->add_option("--n", f.n, "block size n");
    c->add_option("--ell", f.ell, "number of mixing functions");
    c->add_option("--trials", f.trials, "trial count");
    c->add_option("--seed", f.seed, "master seed");
    c->add_option("--out", f.out, "output directory");
    c->add_option("--cap", f.cap, "enumeration cap in bits (sets CRKO_CAP)");
    c->add_flag("--unsafe-params", f.unsafe, "allow ell <= n + 4");
    c->add_option("--workers", f.workers, "worker threads");
    c->add_option("--subverter", f.subverter, "subverter kind");
    c->add_option("--z", f.z, "trigger pattern or peel message (hex)");
    c->add_option("--k", f.k, "trigger length");
    c->add_option("--target", f.target, "target index or 'all'");
    c->add_option("--key", f.key, "prf_gated key (hex)");
    c->add_option("--distinguisher", f.distinguisher, "distinguisher kind");
    c->add_option("--q", f.q, "random_probe query count");
  };
  struct Cmd {
    const char* name;
    const char* help;
    void (*fn)(const Flags&, Output&);
  };
  const Cmd cmds[] = {
      {"demo", "attack demo: broken vs corrected construction", cmd_demo},
      {"game", "run one game variant or the pairwise-equality check", cmd_game},
      {"advantage", "estimate a distinguisher's advantage", cmd_advantage},
      {"crises", "G1..G4 ladder with crisis accounting", cmd_crises},
      {"spectrum", "exact TV and Plancherel bound of the g~ law", cmd_spectrum},
      {"classify", "term classification over one table", cmd_classify},
      {"selfref", "self-reference rate", cmd_selfref},
      {"expgames", "Exp-Many / Exp-One output rates", cmd_expgames},
      {"sweep", "rate sweep over n", cmd_sweep},
      {"export-table", "write a materialized table and R", cmd_export},
  };
  std::vector<std::pair<CLI::App*, const Cmd*>> subs;
  for (const auto& c : cmds) {
    CLI::App* s = app.add_subcommand(c.name, c.help);
    common(s);
    subs.emplace_back(s, &c);
  }
  subs[0].first->add_option("--attack", f.attack, "peel-single | peel-split | trigger");
  subs[1].first->add_option("--variant", f.variant, "G1 G2.1 G2.2 G3.1 G3.2 G4 or pairwise-equality");
  subs[1].first->add_option("--seeds", f.seeds, "number of seeded runs");
  subs[2].first->add_option("--construction", f.construction, "full | broken_single | broken_pair");
  subs[4].first->add_option("--samples", f.samples, "sampled tables");
  subs[4].first->add_option("--eps", f.eps, "epsilon for the threshold (default: estimated)");
  subs[5].first->add_option("--samples", f.samples, "resampling / table samples");
  subs[5].first->add_option("--mode", f.mode, "good | honest | invisible | silent | all");
  subs[7].first->add_option("--terms", f.terms, "Exp-Many list length");
  subs[8].first->add_option("--metric", f.metric, "selfref | expmany");
  subs[8].first->add_option("--n-min", f.n_min, "smallest n");
  subs[8].first->add_option("--n-max", f.n_max, "largest n");
  subs[8].first->add_option("--ell-offset", f.ell_offset, "ell = n + offset");
  subs[8].first->add_option("--terms", f.terms, "Exp-Many list length");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (f.cap) setenv("CRKO_CAP", std::to_string(*f.cap).c_str(), 1);
    (void)enumeration_cap();
    for (const auto& [s, c] : subs) {
      if (!s->parsed()) continue;
      Output out;
      out.dir = f.out.value_or("out");
      out.name = c->name;
      c->fn(f, out);
    }
    return 0;
  } catch (const CapExceeded& e) {
    std::cerr << "crko: desk-scale cap exceeded: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "crko: config error: " << e.what() << '\n';
    return 2;
  } catch (const BudgetExceeded& e) {
    std::cerr << "crko: config error: " << e.what() << '\n';
    return 2;
  } catch (const InvariantBreach& e) {
    std::cerr << "crko: invariant breach: " << e.what() << '\n';
    return 3;
  }
}
