#include <gtest/gtest.h>

#include "crko/crko.hpp"

using namespace crko;

namespace {

struct Fixture {
  Params p;
  std::shared_ptr<DataSets> ds;
  PublicRandomness R;
  SubverterPtr sub;
};

Fixture make(unsigned n, unsigned ell, std::uint64_t seed, SubverterPtr sub = nullptr) {
  Fixture f;
  f.p = derive_params(n, ell, seed);
  f.ds = std::make_shared<DataSets>(f.p);
  f.R = sample_R(f.p, seed ^ 0x55);
  f.sub = sub ? sub : make_honest(f.p);
  return f;
}

}  // namespace

TEST(Simulator, ProgramsH0AtCompletion) {
  Fixture f = make(4, 9, 1);
  Simulator S(f.ds, f.R, f.sub);
  const std::uint64_t x = 0xB;
  (void)S.sim_query(3, x ^ f.R.at(3));
  const Completion* c = S.engine().completion(x);
  ASSERT_NE(c, nullptr);
  // independent recomputation of g~ from the data sets
  std::uint64_t g = 0;
  for (unsigned i = 1; i <= f.p.ell; ++i) g ^= f.ds->h(i, x ^ f.R.at(i));
  EXPECT_EQ(c->g, g);
  if (!S.engine().flags().forwardpred.fired) {
    EXPECT_EQ(S.sim_query(0, g), f.ds->F(x));
    EXPECT_EQ(S.engine().lookup({0, g})->tag, Tag::programmed);
  }
}

TEST(Simulator, CompletionIsIdempotent) {
  Fixture f = make(4, 9, 2);
  Simulator S(f.ds, f.R, f.sub);
  const std::uint64_t g1 = S.complete_constellation(5);
  const std::size_t size = S.engine().th().size();
  EXPECT_EQ(S.complete_constellation(5), g1);
  (void)S.sim_query(2, 5 ^ f.R.at(2));
  EXPECT_EQ(S.engine().th().size(), size);
  EXPECT_EQ(size, f.p.ell + 1);
}

TEST(Simulator, FreeAnswersComeFromDataSets) {
  Fixture f = make(4, 9, 3);
  Simulator S(f.ds, f.R, f.sub);
  for (std::uint64_t y = 0; y < 64; ++y)
    if (!S.engine().lookup({0, y * 37})) ASSERT_EQ(S.sim_query(0, y * 37), f.ds->h(0, y * 37));
  for (std::uint64_t x = 0; x < 16; ++x) ASSERT_EQ(S.F(x), f.ds->F(x));
}

TEST(Simulator, ConsistencySweep) {
  // after any mix of queries, C evaluated through S agrees with F wherever
  // no crisis was recorded
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Fixture f = make(3, 8, seed);
    Simulator S(f.ds, f.R, f.sub);
    KeyedRng rng(seed);
    for (int k = 0; k < 20; ++k) {
      if (rng.below(2)) (void)S.sim_query(0, rng.bits(9));
      else (void)S.sim_query(1 + static_cast<unsigned>(rng.below(8)), rng.bits(3));
    }
    unsigned mismatches = 0;
    for (std::uint64_t x = 0; x < 8; ++x) {
      std::uint64_t g = 0;
      for (unsigned i = 1; i <= 8; ++i) g ^= S.sim_query(i, x ^ f.R.at(i));
      mismatches += S.sim_query(0, g) != S.F(x);
    }
    const auto& fl = S.engine().flags();
    if (!fl.forwardpred.fired && !fl.selfref.fired) ASSERT_EQ(mismatches, 0U) << seed;
    S.engine().audit();
  }
}

TEST(Simulator, TouchBound) {
  auto sub = make_subverter({.kind = SubverterKind::echo_probe}, derive_params(4, 9, 0));
  Fixture f = make(4, 9, 4, sub);
  Simulator S(f.ds, f.R, f.sub);
  const std::size_t bound = 1 + f.p.ell + f.p.ell * sub->budget();
  KeyedRng rng(1);
  for (int k = 0; k < 200; ++k) {
    (void)S.sim_query(1 + static_cast<unsigned>(rng.below(9)), rng.bits(4));
    ASSERT_LE(S.engine().last_touches(), bound);
  }
}

TEST(Simulator, SimQueryAllReturnsConstellation) {
  Fixture f = make(4, 9, 6);
  Simulator S(f.ds, f.R, f.sub);
  const auto all = S.sim_query_all(4, 7);
  ASSERT_EQ(all.size(), 9U);
  const std::uint64_t a = 7 ^ f.R.at(4);
  for (unsigned i = 1; i <= 9; ++i) {
    EXPECT_EQ(all[i - 1].first, (OraclePoint{i, a ^ f.R.at(i)}));
    EXPECT_EQ(all[i - 1].second, f.ds->h(i, a ^ f.R.at(i)));
  }
  EXPECT_THROW(S.sim_query_all(0, 7), ConfigError);
}

TEST(Simulator, ProgrammedAnswerMatchesF) {
  Fixture f = make(3, 8, 7);
  LazyEngine e(Regime::programmed, f.ds, f.R, f.sub);
  (void)e.query_F(3);
  EXPECT_NO_THROW(e.audit());
  const Completion* c = e.completion(3);
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(e.query_h(0, c->g), e.tf().at(3));
}

TEST(DataSets, MaterializedMatchesStream) {
  const Params p = derive_params(3, 8, 8);
  const DataSets a(p);
  const DataSets b = a.materialized();
  EXPECT_TRUE(b.materialized_mode());
  for (std::uint64_t x = 0; x < 8; ++x) EXPECT_EQ(a.F(x), b.F(x));
  for (std::uint64_t y = 0; y < 512; ++y) ASSERT_EQ(a.h(0, y), b.h(0, y));
}

TEST(FullSimulator, EmptyLogNeverAborts) {
  Fixture f = make(4, 9, 9);
  FullSimulator SF(f.ds);
  EXPECT_TRUE(SF.receive(f.R, f.sub));
  EXPECT_FALSE(SF.aborted());
  EXPECT_EQ(SF.phase(), FullPhase::two);
  EXPECT_TRUE(SF.query(1, 3).has_value());
  EXPECT_THROW(SF.receive(f.R, f.sub), ConfigError);
}

TEST(FullSimulator, PhaseOneIsRaw) {
  Fixture f = make(4, 9, 10);
  FullSimulator SF(f.ds);
  EXPECT_EQ(SF.query(0, 0x123), f.ds->h(0, 0x123));
  EXPECT_EQ(SF.query(2, 0x3), f.ds->h(2, 0x3));
  EXPECT_EQ(SF.phase_one_log().size(), 2U);
}

TEST(FullSimulator, ForcedConflictAborts) {
  Fixture f = make(4, 9, 11);
  const std::uint64_t y = 6;
  const std::uint64_t g = ideal_constellation(*f.sub, *f.ds, f.R, y ^ f.R.at(1)).value;
  FullSimulator SF(f.ds);
  (void)SF.query(0, g);
  (void)SF.query(1, y);
  EXPECT_FALSE(SF.receive(f.R, f.sub));
  EXPECT_TRUE(SF.aborted());
  EXPECT_EQ(SF.conflict().point, g);
  EXPECT_EQ(SF.conflict().anchor, y ^ f.R.at(1));
  EXPECT_FALSE(SF.query(1, 0).has_value());
}

TEST(FullSimulator, AbortRateIsSmall) {
  const Params base = derive_params(5, 10, 0);
  auto sub = make_honest(base);
  unsigned aborts = 0;
  const unsigned trials = 1000;
  for (unsigned t = 0; t < trials; ++t) {
    Fixture f = make(5, 10, trial_seed(12, t), sub);
    FullSimulator SF(f.ds);
    KeyedRng rng(trial_seed(13, t));
    for (int k = 0; k < 16; ++k) {
      if (k % 2) (void)SF.query(0, rng.bits(15));
      else (void)SF.query(1 + static_cast<unsigned>(rng.below(10)), rng.bits(5));
    }
    aborts += !SF.receive(f.R, sub);
  }
  EXPECT_LT(static_cast<double>(aborts) / trials, 1e-2);
}

TEST(Engine, CleanRegimeFollowsTable) {
  const Params p = derive_params(3, 8, 14);
  const OracleTable t(p);
  const PublicRandomness R = sample_R(p, 15);
  auto h = make_honest(p);
  LazyEngine e(Regime::clean, std::make_shared<TableSource>(t), R, h);
  for (std::uint64_t x = 0; x < 8; ++x) EXPECT_EQ(e.query_F(x), c_eval(*h, t, R, x));
  EXPECT_THROW(LazyEngine(Regime::programmed, std::make_shared<TableSource>(t), R, h), ConfigError);
}

TEST(Engine, PredFiresWhenH0AlreadyAssigned) {
  // D reads h_0(g~(x)) first, then touches the constellation of x
  const Params p = derive_params(3, 8, 16);
  const OracleTable t(p);
  const PublicRandomness R = sample_R(p, 17);
  auto h = make_honest(p);
  const std::uint64_t x = 2;
  const std::uint64_t g = g_tilde(*h, t, R, x).value;
  LazyEngine e(Regime::clean, std::make_shared<TableSource>(t), R, h);
  (void)e.query_h(0, g);
  EXPECT_FALSE(e.flags().pred.fired);
  (void)e.query_h(1, x ^ R.at(1));
  EXPECT_TRUE(e.flags().pred.fired);
  EXPECT_EQ(e.flags().pred.anchor, x);
  EXPECT_EQ(e.flags().pred.point, g);
}

TEST(Engine, BackwardPredInProgrammedRegime) {
  // F(x) first, then a direct h_0 query at g~(x) before the constellation
  Fixture f = make(3, 8, 18);
  LazyEngine e(Regime::programmed, f.ds, f.R, f.sub);
  const std::uint64_t x = 4;
  (void)e.query_F(x);
  const std::uint64_t g = e.completion(x)->g;
  (void)e.query_h(0, g);
  EXPECT_TRUE(e.flags().backwardpred.fired);
  EXPECT_EQ(e.flags().backwardpred.anchor, x);
}

TEST(Engine, SelfrefWithEchoingSubverter) {
  // a custom program whose h_1 evaluation reads h_0 at the would-be g~:
  // with ell = 1, g~(a) = h~_1(a ^ r_1), which the program can compute itself
  const Params p = derive_params(3, 1, 19);
  auto sub = make_custom_subverter("self", 2, [](unsigned i, std::uint64_t x, QueryHandle& h) {
    const std::uint64_t v = h(i, x);
    if (i == 1) (void)h(0, v);
    return v;
  });
  auto ds = std::make_shared<DataSets>(p);
  const PublicRandomness R = sample_R(p, 20);
  LazyEngine e(Regime::simulator, ds, R, sub);
  (void)e.query_h(1, 5);
  EXPECT_TRUE(e.flags().selfref.fired);
}
