#pragma once

// Fourier analysis over (Z/2)^m, total variation tools, the g~ spectrum,
// term classifiers (good / honest / invisible / silent), normality, the
// self-reference rate and a Chernoff tail check.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "crko/bits.hpp"
#include "crko/construction.hpp"
#include "crko/oracle.hpp"
#include "crko/stats.hpp"
#include "crko/subversion.hpp"
#include "crko/trials.hpp"

namespace crko {

struct Dist {
  unsigned m = 0;
  std::vector<double> w;  // 2^m weights

  static Dist zeros(unsigned m) {
    require_cap(m, enumeration_cap(), "distribution");
    return {m, std::vector<double>(std::size_t{1} << m, 0.0)};
  }
  static Dist uniform(unsigned m) {
    Dist d = zeros(m);
    std::fill(d.w.begin(), d.w.end(), 1.0 / static_cast<double>(d.w.size()));
    return d;
  }
  static Dist point(unsigned m, std::uint64_t a) {
    Dist d = zeros(m);
    d.w.at(a) = 1.0;
    return d;
  }
  double total() const {
    double s = 0;
    for (double v : w) s += v;
    return s;
  }
};

struct Spectrum {
  unsigned m = 0;
  std::vector<double> c;  // c[s] = sum_a f(a) (-1)^{s.a}
};

/// In-place unnormalized Walsh-Hadamard butterfly.
inline void wht_inplace(std::vector<double>& a) {
  const std::size_t n = a.size();
  for (std::size_t len = 1; len < n; len <<= 1)
    for (std::size_t i = 0; i < n; i += len << 1)
      for (std::size_t j = i; j < i + len; ++j) {
        const double u = a[j], v = a[j + len];
        a[j] = u + v;
        a[j + len] = u - v;
      }
}

inline Spectrum wht(const Dist& d) {
  require_cap(d.m, enumeration_cap(), "transform");
  if (d.w.size() != (std::size_t{1} << d.m)) throw ConfigError("distribution length is not 2^m");
  Spectrum s{d.m, d.w};
  wht_inplace(s.c);
  return s;
}

inline Dist inverse_wht(const Spectrum& s) {
  Dist d{s.m, s.c};
  wht_inplace(d.w);
  const double scale = 1.0 / static_cast<double>(d.w.size());
  for (double& v : d.w) v *= scale;
  return d;
}

/// Rescales to unit mass when drift exceeds 1e-12.
inline void renormalize(Dist& d) {
  const double t = d.total();
  if (t > 0 && std::abs(t - 1.0) > 1e-12)
    for (double& v : d.w) v /= t;
}

/// XOR convolution (f * g)(x) = sum_y f(y) g(x ^ y).
inline Dist convolve(const Dist& f, const Dist& g) {
  if (f.m != g.m) throw ConfigError("convolution of distributions on different groups");
  Spectrum a = wht(f);
  const Spectrum b = wht(g);
  for (std::size_t s = 0; s < a.c.size(); ++s) a.c[s] *= b.c[s];
  Dist out = inverse_wht(a);
  for (double& v : out.w) v = std::max(v, 0.0);
  return out;
}

inline double tv_exact(const Dist& f, const Dist& g) {
  if (f.m != g.m) throw ConfigError("total variation between different groups");
  double s = 0;
  for (std::size_t a = 0; a < f.w.size(); ++a) s += std::abs(f.w[a] - g.w[a]);
  return 0.5 * s;
}

inline double tv_to_uniform(const Dist& f) {
  const double u = 1.0 / static_cast<double>(f.w.size());
  double s = 0;
  for (double v : f.w) s += std::abs(v - u);
  return 0.5 * s;
}

/// 1/2 sqrt(sum_{s != 0} f^(s)^2), an upper bound on ||f - U||_tv.
inline double tv_plancherel_bound(const Dist& f) {
  const Spectrum s = wht(f);
  double acc = 0;
  for (std::size_t k = 1; k < s.c.size(); ++k) acc += s.c[k] * s.c[k];
  return 0.5 * std::sqrt(acc);
}

/// Distribution of h~_i(u) over uniform n-bit u, on 3n bits.
inline Dist column_distribution(const Subverter& sub, const OracleTable& table, unsigned i) {
  const Params& p = table.params();
  Dist d = Dist::zeros(p.wide());
  const double w = 1.0 / static_cast<double>(std::uint64_t{1} << p.n);
  TableAccess acc(table);
  for (std::uint64_t u = 0; u <= mask(p.n); ++u) d.w[subverted_eval(sub, acc, i, u).value] += w;
  return d;
}

struct SpectrumReport {
  Dist P;                 // distribution of g~_R(x) with r_t fixed
  double tv = 0.0;        // exact TV to uniform
  double tv_bound = 0.0;  // Plancherel bound
  double threshold = 0.0; // 2^{3n-1} (n 2^{-n/2} + eps)^{ell/2}
  bool violates = false;  // tv >= threshold
};

inline double tvd_threshold(const Params& p, double eps) {
  return std::ldexp(std::pow(p.n * std::pow(2.0, -0.5 * p.n) + eps, 0.5 * p.ell), static_cast<int>(p.wide()) - 1);
}

/// Law of g~_R(x) over uniform R with r_t = r fixed, for a fixed h_*. The
/// ell - 1 free columns are convolved, then shifted by h~_t(x ^ r).
inline SpectrumReport g_tilde_spectrum(const Subverter& sub, const OracleTable& table, unsigned t, std::uint64_t r,
                                       std::uint64_t x, double eps) {
  const Params& p = table.params();
  require_cap(p.wide(), enumeration_cap(), "g~ spectrum");
  if (t == 0 || t > p.ell) throw ConfigError("fixed coordinate must be in 1..ell");
  Dist acc = Dist::point(p.wide(), 0);
  for (unsigned i = 1; i <= p.ell; ++i) {
    if (i == t) continue;
    acc = convolve(acc, column_distribution(sub, table, i));
    renormalize(acc);
  }
  const std::uint64_t shift = subverted_eval(sub, table, t, x ^ r).value;
  SpectrumReport rep;
  rep.P = Dist::zeros(p.wide());
  for (std::uint64_t a = 0; a < acc.w.size(); ++a) rep.P.w[a ^ shift] = acc.w[a];
  rep.tv = tv_to_uniform(rep.P);
  rep.tv_bound = tv_plancherel_bound(rep.P);
  rep.threshold = tvd_threshold(p, eps);
  rep.violates = rep.tv >= rep.threshold;
  return rep;
}

/// Largest CI upper bound of the per-index disagreement estimates.
inline double epsilon_hat(const std::vector<Disagreement>& d) {
  double e = 0;
  for (const auto& x : d) e = std::max(e, x.rate.hi);
  return e;
}

// ---------------------------------------------------------------- term classes

/// Who queries which point: every h~_j(y), j = 0..ell, evaluated once.
class CallerIndex {
 public:
  CallerIndex(const Subverter& sub, const OracleTable& table) : p_(table.params()) {
    require_cap(p_.wide(), enumeration_cap(), "caller index");
    TableAccess acc(table);
    for (unsigned j = 0; j <= p_.ell; ++j)
      for (std::uint64_t y = 0; y <= mask(p_.in_width(j)); ++y) {
        const EvalTrace t = subverted_eval(sub, acc, j, y);
        const bool dishonest = t.value != table.value(j, y);
        for (const auto& e : t.queries) callers_[flat(p_, e.point)].push_back({j, y});
        if (dishonest) subverted_.push_back({j, y});
      }
  }

  const std::vector<OraclePoint>& callers(OraclePoint z) const {
    static const std::vector<OraclePoint> none;
    auto it = callers_.find(flat(p_, z));
    return it == callers_.end() ? none : it->second;
  }

  std::size_t h0_callers(OraclePoint z) const {
    std::size_t c = 0;
    for (const auto& q : callers(z)) c += q.index == 0;
    return c;
  }

  const std::vector<OraclePoint>& subverted_points() const { return subverted_; }

 private:
  Params p_;
  std::map<std::uint64_t, std::vector<OraclePoint>> callers_;
  std::vector<OraclePoint> subverted_;
};

enum class TermMode { good, honest, invisible, silent };

struct TermClass {
  unsigned i = 0;
  std::uint64_t x = 0;
  TermMode mode = TermMode::good;
  bool verdict = false;
  double estimate = 0.0;   // worst disagreement probability observed
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double threshold = 0.0;  // sqrt(eps) or eps^{1/4}
  std::uint64_t samples = 0;
  std::size_t h0_callers = 0;  // silent mode
  bool invisible = false;      // silent mode: the invisibility part
  bool dishonest_flag() const { return mode == TermMode::honest && !verdict; }
};

namespace detail {

// Pr_s[ R[z;s] h_j(y) != R h~_j(y) ] by exhaustion over s (3n <= 12) or sampling.
inline Proportion resample_disagreement(const Subverter& sub, const OracleTable& table, OraclePoint z, unsigned j,
                                        std::uint64_t y, std::uint64_t samples, std::uint64_t seed) {
  const Params& p = table.params();
  std::uint64_t hits = 0, total = 0;
  auto one = [&](std::uint64_t s) {
    const OracleTable t = table.resample(z, s);
    hits += subverted_eval(sub, t, j, y).value != t.value(j, y);
    ++total;
  };
  if (p.wide() <= 12) {
    for (std::uint64_t s = 0; s <= mask(p.wide()); ++s) one(s);
  } else {
    KeyedRng rng(derive_seed(seed, Stream::coins, flat(p, z), (std::uint64_t{j} << 32) ^ y));
    for (std::uint64_t k = 0; k < samples; ++k) one(rng.bits(p.wide()));
  }
  return wilson(hits, total);
}

inline bool invisible_term(const Subverter& sub, const OracleTable& table, const CallerIndex& idx, OraclePoint z,
                           double thr, std::uint64_t samples, std::uint64_t seed, double* worst) {
  bool ok = true;
  for (const auto& c : idx.callers(z)) {
    if (subverted_eval(sub, table, c.index, c.payload).value != table.value(c.index, c.payload)) {
      ok = false;
      if (worst) *worst = std::max(*worst, 1.0);
      continue;
    }
    const Proportion pr = resample_disagreement(sub, table, z, c.index, c.payload, samples, seed);
    if (worst) *worst = std::max(*worst, pr.estimate);
    if (!(pr.estimate < thr)) ok = false;
  }
  return ok;
}

}  // namespace detail

struct ClassifyOptions {
  std::uint64_t samples = 1000;
  double eps_hat = 0.0;
  std::uint64_t seed = 0;
  const CallerIndex* index = nullptr;  // reuse across many terms
};

/// Classifies (x, h_i) under a fixed h_* (`table`). Good mode ignores the
/// table's values and samples fresh tables from `seed`.
inline TermClass classify_term(const Subverter& sub, const OracleTable& table, unsigned i, std::uint64_t x,
                               TermMode mode, const ClassifyOptions& opt) {
  const Params& p = table.params();
  (void)embed(p, i, x);
  TermClass tc;
  tc.i = i;
  tc.x = x;
  tc.mode = mode;
  switch (mode) {
    case TermMode::good: {
      std::uint64_t hits = 0;
      for (std::uint64_t k = 0; k < opt.samples; ++k) {
        Params pk = p;
        pk.seed = trial_seed(opt.seed, k, 0x600D);
        const OracleTable t(pk);
        hits += subverted_eval(sub, t, i, x).value != t.value(i, x);
      }
      const Proportion pr = wilson(hits, opt.samples);
      tc.estimate = pr.estimate;
      tc.ci_lo = pr.lo;
      tc.ci_hi = pr.hi;
      tc.threshold = std::sqrt(opt.eps_hat);
      tc.samples = opt.samples;
      tc.verdict = tc.estimate < tc.threshold || hits == 0;
      break;
    }
    case TermMode::honest: {
      const EvalTrace tr = subverted_eval(sub, table, i, x);
      std::vector<OraclePoint> pts{{i, x}};
      for (const auto& e : tr.queries)
        if (std::find(pts.begin(), pts.end(), e.point) == pts.end()) pts.push_back(e.point);
      tc.threshold = std::pow(opt.eps_hat, 0.25);
      tc.verdict = true;
      for (const auto& z : pts) {
        const Proportion pr = detail::resample_disagreement(sub, table, z, i, x, opt.samples, opt.seed);
        if (pr.estimate >= tc.estimate) {
          tc.estimate = pr.estimate;
          tc.ci_lo = pr.lo;
          tc.ci_hi = pr.hi;
        }
        tc.samples = pr.total;
        if (!(pr.estimate < tc.threshold) && pr.hits > 0) tc.verdict = false;
      }
      break;
    }
    case TermMode::invisible:
    case TermMode::silent: {
      std::optional<CallerIndex> own;
      const CallerIndex* idx = opt.index;
      if (!idx) idx = &own.emplace(sub, table);
      tc.threshold = std::pow(opt.eps_hat, 0.25);
      // a zero threshold (honest subverter) still accepts exact agreement
      const double thr = tc.threshold > 0 ? tc.threshold : 1e-300;
      tc.invisible = detail::invisible_term(sub, table, *idx, {i, x}, thr, opt.samples, opt.seed, &tc.estimate);
      tc.h0_callers = idx->h0_callers({i, x});
      tc.samples = p.wide() <= 12 ? (std::uint64_t{1} << p.wide()) : opt.samples;
      if (mode == TermMode::invisible) {
        tc.verdict = tc.invisible;
      } else {
        const double limit = std::pow(2.0, 2.5 * p.n) * sub.budget();
        tc.verdict = tc.invisible && static_cast<double>(tc.h0_callers) < limit;
      }
      break;
    }
  }
  return tc;
}

struct NormalityReport {
  bool normal = false;
  std::vector<unsigned> invisible_counts;  // per anchor x
  unsigned min_count = 0;
};

/// (R, h_*) is normal iff every constellation keeps at least ell - n invisible terms.
inline NormalityReport check_normality(const Subverter& sub, const OracleTable& table, const PublicRandomness& R,
                                       double eps_hat, std::uint64_t samples = 256, std::uint64_t seed = 0) {
  const Params& p = table.params();
  check_randomness(p, R);
  const CallerIndex idx(sub, table);
  const double thr = eps_hat > 0 ? std::pow(eps_hat, 0.25) : 1e-300;
  std::map<std::uint64_t, bool> memo;
  auto invisible = [&](OraclePoint z) {
    auto [it, fresh] = memo.try_emplace(flat(p, z), false);
    if (fresh) it->second = detail::invisible_term(sub, table, idx, z, thr, samples, seed, nullptr);
    return it->second;
  };
  NormalityReport rep;
  rep.min_count = p.ell;
  for (std::uint64_t x = 0; x <= mask(p.n); ++x) {
    unsigned c = 0;
    for (unsigned i = 1; i <= p.ell; ++i) c += invisible({i, x ^ R.at(i)});
    rep.invisible_counts.push_back(c);
    rep.min_count = std::min(rep.min_count, c);
  }
  rep.normal = rep.min_count + p.n >= p.ell;
  return rep;
}

/// Fraction of (R, h_*, x) whose completion evaluates h_0 at g~_R(x).
inline Proportion selfref_rate(const Subverter& sub, const Params& p, std::uint64_t trials, std::uint64_t master,
                               unsigned workers = 1) {
  auto hits = parallel_map(trials, workers, [&](std::uint64_t t) -> std::uint8_t {
    Params pt = p;
    pt.seed = trial_seed(master, t, 0);
    const OracleTable table(pt);
    const PublicRandomness R = sample_R(p, trial_seed(master, t, 1));
    KeyedRng rng(trial_seed(master, t, 2));
    const std::uint64_t x = rng.bits(p.n);
    const EvalTrace g = g_tilde(sub, table, R, x);
    for (const auto& e : g.queries)
      if (e.point == OraclePoint{0, g.value}) return 1;
    return 0;
  });
  std::uint64_t h = 0;
  for (auto v : hits) h += v;
  return wilson(h, trials);
}

struct ChernoffReport {
  double lambda = 0;
  double sigma = 0;
  Proportion tail;  // Pr[|X| >= lambda sigma]
  double bound = 0; // 2 exp(-lambda^2 / 4)
};

/// X = sum_i chi_s(h_i(x ^ r_i)) over fresh tables, s a nonzero character.
inline ChernoffReport chernoff_tail(const Params& p, std::uint64_t s, double lambda, std::uint64_t trials,
                                    std::uint64_t master, unsigned workers = 1) {
  if (s == 0 || !fits(s, p.wide())) throw ConfigError("character must be a nonzero 3n-bit mask");
  const double sigma = std::sqrt(static_cast<double>(p.ell));
  if (lambda < 0 || lambda > 2 * sigma) throw ConfigError("lambda outside [0, 2 sigma]");
  auto hits = parallel_map(trials, workers, [&](std::uint64_t t) -> std::uint8_t {
    Params pt = p;
    pt.seed = trial_seed(master, t, 0xC4);
    const OracleTable table(pt);
    const PublicRandomness R = sample_R(p, trial_seed(master, t, 0xC5));
    KeyedRng rng(trial_seed(master, t, 0xC6));
    const std::uint64_t x = rng.bits(p.n);
    int X = 0;
    for (unsigned i = 1; i <= p.ell; ++i) X += (std::popcount(table.value(i, x ^ R.at(i)) & s) & 1) ? -1 : 1;
    return std::abs(static_cast<double>(X)) >= lambda * sigma ? 1 : 0;
  });
  std::uint64_t h = 0;
  for (auto v : hits) h += v;
  return {lambda, sigma, wilson(h, trials), 2.0 * std::exp(-lambda * lambda / 4.0)};
}

// ---------------------------------------------------------------- export

inline void write_csv(std::ostream& out, const Dist& d) {
  out << "index,weight\n";
  out.precision(17);
  for (std::size_t a = 0; a < d.w.size(); ++a) out << a << ',' << d.w[a] << '\n';
}

inline void write_csv(std::ostream& out, const Spectrum& s) {
  out << "index,coefficient\n";
  out.precision(17);
  for (std::size_t a = 0; a < s.c.size(); ++a) out << a << ',' << s.c[a] << '\n';
}

}  // namespace crko
