#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "rlvr/model.hpp"

using namespace rlvr;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an rlvr::Error";
  return ErrorCode::io;
}

}  // namespace

TEST(PatternTask, IdentifiesBestAndRunnerUp) {
  const auto t = PatternTask::from_rates(std::vector{0.6, 0.9, 0.1});
  EXPECT_EQ(t.best(), 1u);
  ASSERT_TRUE(t.runner_up());
  EXPECT_EQ(*t.runner_up(), 0u);
  EXPECT_NEAR(t.gap(), 0.3, 1e-15);
  EXPECT_EQ(t.patterns()[2].name, "r3");
}

TEST(PatternTask, TiedMaximumIsIllPosedWhereRStarIsNeeded) {
  const auto t = PatternTask::from_rates(std::vector{0.7, 0.7, 0.2});
  EXPECT_FALSE(t.has_unique_best());
  EXPECT_EQ(code_of([&] { (void)t.best(); }), ErrorCode::ill_posed_task);
  EXPECT_EQ(code_of([&] { classify_regime(t, std::vector{0.3, 0.3, 0.4}); }), ErrorCode::ill_posed_task);
}

TEST(PatternTask, TiedRunnerUpIsAllowedUntilNeeded) {
  const auto t = PatternTask::from_rates(std::vector{0.9, 0.5, 0.5});
  EXPECT_FALSE(t.runner_up());
  EXPECT_EQ(code_of([&] { (void)t.require_runner_up(); }), ErrorCode::ill_posed_task);
}

TEST(PatternTask, RejectsRatesOutsideUnitInterval) {
  EXPECT_EQ(code_of([] { PatternTask::from_rates(std::vector{1.2, 0.1}); }), ErrorCode::validation);
  EXPECT_EQ(code_of([] { PatternTask::from_rates(std::vector{-0.1, 0.1}); }), ErrorCode::validation);
  EXPECT_EQ(code_of([] { PatternTask::from_rates(std::vector{0.5}); }), ErrorCode::invalid_input);
}

TEST(PatternTask, PermutedKeepsPatternsTogether) {
  const auto t = PatternTask::from_rates(std::vector{0.9, 0.6, 0.1});
  const std::vector<std::size_t> perm{2, 0, 1};
  const auto p = t.permuted(perm);
  EXPECT_EQ(p.best(), 1u);
  EXPECT_EQ(p.patterns()[0].name, "r3");
}

TEST(Softmax, MatchesLongDoubleOracle) {
  oracle::Rng rng(3);
  for (int n = 0; n < 200; ++n) {
    std::vector<double> z(2 + rng.index(5));
    for (double& x : z) x = rng.uniform(-30, 30);
    const auto got = softmax(z);
    const auto want = oracle::softmax_ld(z);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-15);
  }
}

TEST(Softmax, HandlesExtremeLogits) {
  const auto p = softmax(std::vector{800.0, 0.0, -800.0});
  EXPECT_DOUBLE_EQ(p[0], 1.0);
  EXPECT_EQ(p[2], 0.0);
  EXPECT_EQ(code_of([] { softmax(std::vector{NAN, 0.0}); }), ErrorCode::invalid_input);
}

TEST(PolicyState, LogitsStayCenteredAndProbsMatch) {
  auto s = PolicyState::from_logits(std::vector{3.0, 1.0, -0.5});
  const auto z = s.logits();
  EXPECT_NEAR(std::accumulate(z.begin(), z.end(), 0.0), 0.0, 1e-15);
  s.advance(std::vector{1.0, 1.0, 1.0}, 5.0);
  EXPECT_NEAR(std::accumulate(s.logits().begin(), s.logits().end(), 0.0), 0.0, 1e-14);
  const auto want = oracle::softmax_ld({3.0, 1.0, -0.5});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s.prob(i), want[i], 1e-15);
}

TEST(PolicyState, FromProbsRoundTrips) {
  const std::vector<double> p{0.05, 0.7, 0.25};
  const auto s = PolicyState::from_probs(p);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s.prob(i), p[i], 1e-15);
  EXPECT_EQ(code_of([] { PolicyState::from_probs(std::vector{0.0, 1.0}); }), ErrorCode::invalid_input);
  EXPECT_EQ(code_of([] { PolicyState::from_probs(std::vector{0.5, 0.6}); }), ErrorCode::invalid_input);
}

TEST(Accuracy, IsExpectedSuccess) {
  const auto t = PatternTask::from_rates(std::vector{0.9, 0.6, 0.1});
  EXPECT_NEAR(accuracy(t, std::vector{0.05, 0.7, 0.25}), 0.49, 1e-15);
  EXPECT_NEAR(accuracy(t, std::vector{0.5, 0.3, 0.2}), 0.65, 1e-15);
}

TEST(ClassifyRegime, KnownConfigurations) {
  const auto t = PatternTask::from_rates(std::vector{0.9, 0.6, 0.1});
  EXPECT_EQ(classify_regime(t, std::vector{0.5, 0.3, 0.2}).regime, Regime::regime1);
  EXPECT_EQ(classify_regime(t, std::vector{0.05, 0.7, 0.25}).regime, Regime::regime2);
  const auto t4 = PatternTask::from_rates(std::vector{0.9, 0.8, 0.7, 0.0});
  const auto c = classify_regime(t4, std::vector{0.01, 0.1, 0.1, 0.79});
  EXPECT_EQ(c.regime, Regime::neither);  // r' and r3 both beat Acc
}

TEST(ClassifyRegime, BoundaryEqualityIsFlaggedAsNeither) {
  const auto t = PatternTask::from_rates(std::vector{1.0, 0.5, 0.0});
  // Acc = 0.25 + 0.25 = 0.5 = p(r')
  const auto c = classify_regime(t, std::vector{0.25, 0.5, 0.25});
  EXPECT_EQ(c.regime, Regime::neither);
  EXPECT_TRUE(c.boundary_equality);
}

TEST(ClassifyRegime, InvariantUnderPermutation) {
  oracle::Rng rng(11);
  for (int n = 0; n < 100; ++n) {
    const std::size_t k = 2 + rng.index(4);
    const auto rates = rng.rates(k);
    const auto ref = rng.dirichlet(k);
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    std::vector<double> pref(k);
    for (std::size_t i = 0; i < k; ++i) pref[i] = ref[perm[i]];
    const auto t = PatternTask::from_rates(rates);
    EXPECT_EQ(classify_regime(t, ref).regime, classify_regime(t.permuted(perm), pref).regime);
  }
}

TEST(Scenario, ValidateRejectsBadFields) {
  Scenario s{PatternTask::from_rates(std::vector{0.9, 0.1}), PolicyState::uniform(2)};
  s.horizon = 1;
  EXPECT_NO_THROW(validate(s));
  s.step = 0;
  EXPECT_EQ(code_of([&] { validate(s); }), ErrorCode::validation);
  s.step = 0.1;
  s.beta = -1;
  EXPECT_EQ(code_of([&] { validate(s); }), ErrorCode::validation);
  s.beta = 0;
  s.mode = Mode::sft_flow;
  EXPECT_EQ(code_of([&] { validate(s); }), ErrorCode::validation);
  s.record_stride = 0;
  s.mode = Mode::rlvr_flow;
  EXPECT_EQ(code_of([&] { validate(s); }), ErrorCode::validation);
}

TEST(Softmax, SmallExamples) {
  const auto a = softmax(std::vector{0.0, 0.0});
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  const auto b = softmax(std::vector{4.2, 4.2, 4.2});
  for (double p : b) EXPECT_NEAR(p, 1.0 / 3.0, 1e-16);
  const auto c = softmax(std::vector{std::log(2.0), 0.0, 0.0});
  EXPECT_NEAR(c[0], 0.5, 1e-16);
  EXPECT_NEAR(c[1], 0.25, 1e-16);
}

TEST(LogitsFromProbs, UniformGivesZeroAndRoundTrips) {
  for (double z : logits_from_probs(std::vector{0.5, 0.5})) EXPECT_EQ(z, 0.0);
  for (double z : logits_from_probs(std::vector{1.0 / 3, 1.0 / 3, 1.0 / 3})) EXPECT_NEAR(z, 0.0, 1e-16);
  oracle::Rng rng(5);
  for (int n = 0; n < 100; ++n) {
    const auto p = rng.dirichlet(2 + rng.index(5));
    const auto back = softmax(logits_from_probs(p));
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(back[i], p[i], 1e-12);
  }
}

TEST(Accuracy, ConstantAndOneHot) {
  const auto t = PatternTask::from_rates(std::vector{0.9, 0.6, 0.1});
  EXPECT_NEAR(accuracy(t, std::vector{0.0, 1.0, 0.0}), 0.6, 0.0);
  EXPECT_NEAR(accuracy(PatternTask::from_rates(std::vector{0.7, 0.2}), std::vector{0.3, 0.7}), 0.35, 1e-15);
  const auto two = PatternTask::from_rates(std::vector{0.8, 0.2});
  EXPECT_EQ(classify_regime(two, std::vector{0.5, 0.5}).regime, Regime::regime1);
}
