#include <gtest/gtest.h>

#include <sstream>

#include "crko/crko.hpp"

using namespace crko;

namespace {

// reads the raw n'-bit table directly; honest evaluation only
std::uint64_t brute_c(const OracleTable& t, const PublicRandomness& R, std::uint64_t x) {
  const Params& p = t.params();
  std::uint64_t g = 0;
  for (unsigned i = 1; i <= p.ell; ++i) g ^= t.raw({i, x ^ R.r[i - 1]});
  return t.raw({0, g}) >> (2 * p.n);
}

}  // namespace

TEST(Construction, AllZeroTable) {
  const Params p = derive_params(3, 8, 0);
  const OracleTable t = OracleTable::from_function(p, [](OraclePoint) { return std::uint64_t{0}; });
  const PublicRandomness R = sample_R(p, 1);
  auto h = make_honest(p);
  for (std::uint64_t x = 0; x < 8; ++x) EXPECT_EQ(c_eval(*h, t, R, x), 0U);
}

TEST(Construction, ConstantColumnsCancelInPairs) {
  // h_i == c for every i: ell = 8 terms XOR to 0, so C(x) = h_0(0)
  const Params p = derive_params(3, 8, 0);
  const OracleTable t = OracleTable::from_function(p, [](OraclePoint z) -> std::uint64_t {
    return z.index == 0 ? (z.payload == 0 ? 0b101000000ULL : 0ULL) : 0x1B5ULL;
  });
  auto h = make_honest(p);
  const PublicRandomness R = sample_R(p, 77);
  for (std::uint64_t x = 0; x < 8; ++x) EXPECT_EQ(c_eval(*h, t, R, x), 0b101U);
}

TEST(Construction, DualPathAgreesWithRawTable) {
  auto h = make_honest(derive_params(3, 8, 0));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Params p = derive_params(3, 8, seed);
    const OracleTable t(p);
    const PublicRandomness R = sample_R(p, seed + 1000);
    for (std::uint64_t x = 0; x < 8; ++x) ASSERT_EQ(c_eval(*h, t, R, x), brute_c(t.materialize(), R, x));
  }
}

TEST(Construction, SubvertedOuterMatchesHandComputation) {
  const Params p = derive_params(4, 9, 5);
  const OracleTable t(p);
  const PublicRandomness R = sample_R(p, 6);
  SubverterSpec s;
  s.kind = SubverterKind::prefix_trigger;
  s.z = 0b11;
  s.k = 2;
  auto sub = make_subverter(s, p);
  auto h = make_honest(p);
  for (std::uint64_t x = 0; x < 16; ++x) {
    const std::uint64_t g = g_tilde(*h, t, R, x).value;  // inner terms untouched
    const std::uint64_t want = (g >> 10) == 0b11 ? (g & 0xF) : t.raw({0, g}) >> 8;
    ASSERT_EQ(c_eval(*sub, t, R, x), want);
  }
}

TEST(Construction, GTildeTraceCoversConstellation) {
  const Params p = derive_params(3, 8, 3);
  const OracleTable t(p);
  const PublicRandomness R = sample_R(p, 4);
  auto h = make_honest(p);
  const EvalTrace tr = g_tilde(*h, t, R, 5);
  const auto pts = constellation(p, R, 5);
  ASSERT_EQ(tr.queries.size(), pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) EXPECT_EQ(tr.queries[k].point, pts[k]);
}

TEST(Construction, PeelAttacksOnBrokenVariants) {
  const Params p = derive_params(8, 13, 9);
  const OracleTable t(p);
  const PublicRandomness R = sample_R(p, 10);
  SubverterSpec s;
  s.kind = SubverterKind::peel_single;
  s.z = 0x3C;
  auto single = make_subverter(s, p);
  EXPECT_EQ(broken_eval(BrokenVariant::single, *single, t, R, 0x3C ^ R.at(1)), 0U);
  s.kind = SubverterKind::peel_split;
  s.z = 0x9;
  auto split = make_subverter(s, p);
  const std::uint64_t hi = 0x9 ^ (R.at(1) >> 4);
  const std::uint64_t lo = 0x9 ^ (R.at(2) & 0xF);
  const std::uint64_t x = ((hi & 0xF) << 4) | (lo & 0xF);
  EXPECT_EQ(broken_eval(BrokenVariant::pair, *split, t, R, x), 0U);
  // the full construction still routes through h_0
  EXPECT_EQ(c_eval(*single, t, R, 0x3C ^ R.at(1)),
            t.value(0, g_tilde(*single, t, R, 0x3C ^ R.at(1)).value));
}

TEST(Randomness, SeedDeterminism) {
  const Params p = derive_params(5, 10, 0);
  EXPECT_EQ(sample_R(p, 3), sample_R(p, 3));
  EXPECT_NE(sample_R(p, 3), sample_R(p, 4));
  for (auto v : sample_R(p, 3).r) EXPECT_LT(v, 32U);
}

TEST(Randomness, RoundTrips) {
  const Params p = derive_params(11, 15, 0);
  const PublicRandomness R = sample_R(p, 12);
  std::stringstream ss;
  write_binary(ss, R);
  EXPECT_EQ(ss.str().size(), 7U + 15U * 2U);
  EXPECT_EQ(read_randomness(ss), R);
  EXPECT_EQ(randomness_from_json(to_json(R)), R);
  std::stringstream bad("CRKR\x02\x01");
  EXPECT_THROW(read_randomness(bad), ConfigError);
  PublicRandomness wrong = R;
  wrong.r.pop_back();
  EXPECT_THROW(check_randomness(p, wrong), ConfigError);
}

TEST(Randomness, BitMeansAreBalanced) {
  const Params p = derive_params(8, 20, 0);
  std::vector<std::uint64_t> ones(8, 0);
  const std::uint64_t draws = 5000;
  for (std::uint64_t s = 0; s < draws; ++s)
    for (auto v : sample_R(p, s).r)
      for (unsigned b = 0; b < 8; ++b) ones[b] += (v >> b) & 1;
  const double total = static_cast<double>(draws * p.ell);
  for (auto c : ones) EXPECT_NEAR(c / total, 0.5, 0.01);
}

TEST(Construction, OutputUniformOverTables) {
  const Params base = derive_params(3, 8, 0);
  auto h = make_honest(base);
  std::vector<std::uint64_t> counts(8, 0);
  for (std::uint64_t s = 0; s < 8000; ++s) {
    Params p = base;
    p.seed = trial_seed(31, s);
    counts[c_eval(*h, OracleTable(p), sample_R(p, s), s & 7)]++;
  }
  EXPECT_GT(chi_square_uniform(counts).p_value, 0.001);
}
