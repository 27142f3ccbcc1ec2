// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "crko/crko.hpp"

using namespace crko;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = dt < limit_s;
  const bool ok = o.pass && in_time;
  if (!ok) ++failures;
  std::ostringstream line;
  line << (ok ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << " (" << fmt(dt, 3) << " s";
  if (!in_time) line << ", limit " << limit_s << " s";
  line << ")";
  std::cout << line.str() << std::endl;
}

SubverterPtr prefix_trigger(const Params& p, unsigned k, int target = 0) {
  SubverterSpec s;
  s.kind = SubverterKind::prefix_trigger;
  s.k = k;
  s.target = target;
  return make_subverter(s, p);
}

DistinguisherPtr random_probe(const Params& p) {
  DistinguisherSpec d;
  d.kind = DistinguisherKind::random_probe;
  d.q = 16;
  return make_distinguisher(d, nullptr, p);
}

// ------------------------------------------------------------------ 1
Outcome dual_path() {
  auto h = make_honest(derive_params(3, 8, 0));
  unsigned mismatches = 0, cells = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Params p = derive_params(3, 8, seed);
    const OracleTable lazy(p);
    const OracleTable dense = lazy.materialize();
    const PublicRandomness R = sample_R(p, trial_seed(seed, 0, 1));
    // brute force: raw n'-bit addresses, prefix of the stored h_0 word
    const unsigned w = p.wide();
    for (std::uint64_t x = 0; x < 8; ++x) {
      std::uint64_t g = 0;
      for (unsigned i = 1; i <= p.ell; ++i) g ^= dense.raw(unflat(p, (std::uint64_t{i} << w) | (x ^ R.r[i - 1])));
      const std::uint64_t want = dense.raw(unflat(p, g)) >> (2 * p.n);
      mismatches += c_eval(*h, lazy, R, x) != want;
      ++cells;
    }
  }
  return {mismatches == 0, std::to_string(cells - mismatches) + "/" + std::to_string(cells) + " truth-table cells equal"};
}

// ------------------------------------------------------------------ 2
Outcome shared_coins() {
  const Params base = derive_params(4, 9, 0);
  auto D = random_probe(base);
  auto sub = prefix_trigger(base, 6);
  unsigned same21 = 0, same31 = 0;
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const TrialSetup s = trial_setup(base, 0xA2, t);
    same21 += run_game(GameVariant::G2_1, *D, sub, s.params, s.seeds).transcript ==
              run_game(GameVariant::G2_2, *D, sub, s.params, s.seeds).transcript;
    same31 += run_game(GameVariant::G3_1, *D, sub, s.params, s.seeds).transcript ==
              run_game(GameVariant::G3_2, *D, sub, s.params, s.seeds).transcript;
  }
  return {same21 == 1000 && same31 == 1000, "G2.1==G2.2 " + std::to_string(same21) + "/1000, G3.1==G3.2 " +
                                                std::to_string(same31) + "/1000"};
}

// ------------------------------------------------------------------ 3
Outcome agreement() {
  const Params base = derive_params(4, 9, 0);
  auto D = random_probe(base);
  auto sub = make_honest(base);
  unsigned diverged = 0, unexplained = 0;
  for (std::uint64_t t = 0; t < 10000; ++t) {
    const TrialSetup s = trial_setup(base, 0xA3, t);
    const GameResult a = run_game(GameVariant::G3_2, *D, sub, s.params, s.seeds);
    const GameResult b = run_game(GameVariant::G4, *D, sub, s.params, s.seeds);
    if (a.transcript == b.transcript) continue;
    ++diverged;
    if (!a.flags.forwardpred.fired && !a.flags.backwardpred.fired) ++unexplained;
  }
  return {unexplained == 0,
          std::to_string(diverged) + " divergences in 10000 runs, " + std::to_string(unexplained) + " unexplained"};
}

// ------------------------------------------------------------------ 4
Outcome triangle() {
  const Params base = derive_params(4, 9, 0);
  auto D = random_probe(base);
  std::ostringstream msg;
  bool ok = true;
  for (auto sub : {make_honest(base), prefix_trigger(base, 6)}) {
    unsigned div = 0, decision_div = 0, unexplained = 0, decision_unexplained = 0;
    for (std::uint64_t t = 0; t < 10000; ++t) {
      const LadderRun r = run_ladder(*D, sub, trial_setup(base, 0xA4, t));
      div += r.g1_vs_g4_diverged;
      const bool dd = r.g1.decision != r.g4.decision;
      decision_div += dd;
      unexplained += r.unexplained;
      decision_unexplained += dd && r.unexplained;
      ok &= verify_witnesses(r.g22) && verify_witnesses(r.g32);
    }
    ok &= unexplained == 0;
    msg << sub->label() << ": " << div << " transcript / " << decision_div << " decision divergences, "
        << unexplained << " unexplained (" << decision_unexplained << " decision-relevant); ";
  }
  return {ok, msg.str()};
}

// ------------------------------------------------------------------ 5
Outcome separation() {
  const Params p = derive_params(8, 13, 0);
  std::ostringstream msg;
  bool ok = true;
  struct Arm {
    SubverterKind sk;
    DistinguisherKind dk;
    Construction broken;
    std::uint64_t m;
    const char* name;
  };
  for (const Arm& a : {Arm{SubverterKind::peel_single, DistinguisherKind::peel_single_attack,
                           Construction::broken_single, 0x5A, "peel_single"},
                       Arm{SubverterKind::peel_split, DistinguisherKind::peel_split_attack, Construction::broken_pair,
                           0x5, "peel_split"}}) {
    SubverterSpec s;
    s.kind = a.sk;
    s.z = a.m;
    auto sub = make_subverter(s, p);
    DistinguisherSpec d;
    d.kind = a.dk;
    d.m = a.m;
    auto D = make_distinguisher(d, sub, p);
    const AdvantageReport br = estimate_advantage(*D, sub, p, 10000, 0xA5, 1, a.broken);
    const AdvantageReport fu = estimate_advantage(*D, sub, p, 10000, 0xA5, 1, Construction::full);
    ok &= br.lo >= 0.99 && fu.hi <= 0.05;
    msg << a.name << " broken " << fmt(br.advantage, 4) << " (lo " << fmt(br.lo, 4) << "), full "
        << fmt(fu.advantage, 4) << " (hi " << fmt(fu.hi, 4) << "); ";
  }
  return {ok, msg.str()};
}

// ------------------------------------------------------------------ 6
Outcome consistency() {
  const Params p = derive_params(4, 9, 0);
  auto h = make_honest(p);
  DistinguisherSpec d;
  d.kind = DistinguisherKind::consistency_check;
  auto D = make_distinguisher(d, h, p);
  unsigned ones = 0, failures_without_witness = 0;
  for (std::uint64_t t = 0; t < 10000; ++t) {
    const TrialSetup s = trial_setup(p, 0xA6, t);
    const GameResult r = run_game(GameVariant::G4, *D, h, s.params, s.seeds);
    if (r.decision) ++ones;
    else if (!r.flags.any_indiff() || !verify_witnesses(r)) ++failures_without_witness;
  }
  return {ones >= 9990 && failures_without_witness == 0,
          std::to_string(ones) + "/10000 output 1, " + std::to_string(failures_without_witness) +
              " failures without a witness"};
}

// ------------------------------------------------------------------ 7
Outcome fourier() {
  KeyedRng rng(0xA7);
  auto rand_dist = [&](unsigned m) {
    Dist d = Dist::zeros(m);
    for (double& v : d.w) v = rng.uniform01();
    renormalize(d);
    return d;
  };
  double rt = 0, conv = 0;
  unsigned viol = 0;
  for (unsigned m = 1; m <= 12; ++m)
    for (int k = 0; k < 5; ++k) {
      const Dist d = rand_dist(m);
      const Dist back = inverse_wht(wht(d));
      for (std::size_t a = 0; a < d.w.size(); ++a) rt = std::max(rt, std::abs(back.w[a] - d.w[a]));
    }
  for (int k = 0; k < 100; ++k) {
    const unsigned m = 1 + static_cast<unsigned>(rng.below(10));
    const Dist f = rand_dist(m), g = rand_dist(m);
    const Dist c = convolve(f, g);
    // naive sum
    for (std::size_t x = 0; x < f.w.size(); ++x) {
      double s = 0;
      for (std::size_t y = 0; y < f.w.size(); ++y) s += f.w[y] * g.w[x ^ y];
      conv = std::max(conv, std::abs(s - c.w[x]));
    }
  }
  for (int k = 0; k < 1000; ++k) {
    const Dist d = rand_dist(8);
    viol += tv_plancherel_bound(d) + 1e-12 < tv_to_uniform(d);
  }
  std::ostringstream msg;
  msg << "round-trip err " << rt << ", convolution err " << conv << ", Plancherel violations " << viol << "/1000";
  return {rt < 1e-10 && conv < 1e-10 && viol == 0, msg.str()};
}

// ------------------------------------------------------------------ 8
Outcome tvd() {
  const Params base = derive_params(3, 8, 0);
  std::ostringstream msg;
  bool ok = true;
  for (auto sub : {make_honest(base), prefix_trigger(base, 4)}) {
    const double eps = epsilon_hat(estimate_epsilon(*sub, base, {.trials = 8}));
    unsigned over = 0;
    double worst = 0, thr = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      Params ps = base;
      ps.seed = trial_seed(0xA8, s, 0);
      KeyedRng rng(trial_seed(0xA8, s, 1));
      const std::uint64_t r = rng.bits(3), x = rng.bits(3);
      const SpectrumReport rep = g_tilde_spectrum(*sub, OracleTable(ps), 1, r, x, eps);
      over += rep.violates;
      worst = std::max(worst, rep.tv);
      thr = rep.threshold;
    }
    ok &= over == 0;
    msg << sub->label() << ": " << over << "/100 over threshold " << fmt(thr, 4) << " (max TV " << fmt(worst, 4)
        << ", eps_hat " << fmt(eps, 3) << "); ";
  }
  return {ok, msg.str()};
}

// ------------------------------------------------------------------ 9
Outcome rates() {
  const std::uint64_t trials = 20000;
  std::vector<Proportion> self, many;
  for (unsigned n = 3; n <= 5; ++n) {
    const Params p = derive_params(n, n + 5, 0xA9);
    SubverterSpec s;
    s.kind = SubverterKind::echo_probe;
    auto sub = make_subverter(s, p);
    self.push_back(selfref_rate(*sub, p, trials, 0xA9 + n));
    auto hits = parallel_map(trials, 1, [&](std::uint64_t t) -> std::uint8_t {
      return run_exp_many(ManyKind::random_list, 16, sub, p, trial_seed(0xAA, t, n)).output;
    });
    std::uint64_t h = 0;
    for (auto v : hits) h += v;
    many.push_back(wilson(h, trials));
  }
  auto trend = [](const std::vector<Proportion>& v) {
    return v[0].estimate >= v[1].estimate && v[1].estimate >= v[2].estimate && v[0].lo > v[2].hi;
  };
  std::ostringstream msg;
  msg << "selfref";
  for (const auto& p : self) msg << ' ' << fmt(p.estimate, 3);
  msg << "; exp-many";
  for (const auto& p : many) msg << ' ' << fmt(p.estimate, 3);
  return {trend(self) && trend(many), msg.str()};
}

// ------------------------------------------------------------------ 10
Outcome epsilon_exact() {
  bool ok = true;
  std::ostringstream msg;
  const unsigned k = 3;
  for (unsigned n = 4; n <= 10; ++n) {
    const Params p = derive_params(n, n + 5, 0xAB);
    auto sub = prefix_trigger(p, k, 1);
    const std::uint64_t tables = 4;
    const auto d = estimate_epsilon(*sub, p, {.trials = tables, .indices = {1}});
    // independent count: triggered inputs whose table value happens to equal rho
    std::uint64_t want = 0;
    for (std::uint64_t t = 0; t < tables; ++t) {
      Params pt = p;
      pt.seed = trial_seed(p.seed, t, 0xE95);
      const OracleTable tab(pt);
      for (std::uint64_t x = 0; x <= mask(n); ++x)
        if ((x >> (n - k)) == 0) want += tab.value(1, x) != (x & mask(n - k));
    }
    const double bound = std::ldexp(1.0, -static_cast<int>(k));
    const bool this_ok = d.size() == 1 && d[0].exhaustive && d[0].rate.hits == want && d[0].rate.estimate <= bound;
    ok &= this_ok;
    msg << "n=" << n << ' ' << fmt(d[0].rate.estimate, 6) << (this_ok ? "" : "!") << ' ';
  }
  msg << "(bound " << fmt(std::ldexp(1.0, -static_cast<int>(k)), 6) << ")";
  return {ok, msg.str()};
}

// ------------------------------------------------------------------ 11
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "crko_acceptance_repro";
  fs::remove_all(root);
  const std::vector<std::string> runs = {
      "game --variant pairwise-equality --seeds 100",
      "crises --n 4 --ell 9 --trials 300",
      "spectrum --n 3 --ell 8 --samples 20",
      "selfref --n 3 --ell 8 --trials 2000",
      "expgames --n 3 --ell 8 --trials 500",
      "sweep --metric expmany --trials 500",
      "demo --attack peel-single --n 8 --trials 200",
      "classify --n 2 --ell 7 --samples 50",
  };
  unsigned identical = 0, files = 0;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = root / (std::to_string(k) + "_" + std::to_string(rep));
      const std::string cmd = std::string(CRKO_CLI_PATH) + " " + runs[k] + " --seed 11 --workers " +
                              std::to_string(rep + 1) + " --out " + dir.string() + " > /dev/null 2>&1";
      const int rc = std::system(cmd.c_str());
      if (!WIFEXITED(rc) || WEXITSTATUS(rc) != 0) return {false, "command failed: " + runs[k]};
    }
    for (const auto& e : fs::directory_iterator(root / (std::to_string(k) + "_0"))) {
      if (e.path().extension() != ".csv") continue;
      ++files;
      identical += slurp(e.path()) == slurp(root / (std::to_string(k) + "_1") / e.path().filename());
    }
  }
  return {files == runs.size() && identical == files,
          std::to_string(identical) + "/" + std::to_string(files) + " CSV files byte-identical across reruns"};
}

}  // namespace

int main() {
  criterion(1, "dual-path construction equality", 5, dual_path);
  criterion(2, "shared-coin equalities", 60, shared_coins);
  criterion(3, "G3.2 vs G4 agreement", 600, agreement);
  criterion(4, "triangle accounting G1 vs G4", 900, triangle);
  criterion(5, "attack separation", 600, separation);
  criterion(6, "simulator consistency", 600, consistency);
  criterion(7, "Fourier suite", 60, fourier);
  criterion(8, "g~ TV threshold at desk scale", 300, tvd);
  criterion(9, "rate scaling directionality", 1200, rates);
  criterion(10, "disagreement estimator exactness", 60, epsilon_exact);
  criterion(11, "reproducibility", 600, reproducibility);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
