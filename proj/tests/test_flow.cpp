#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "rlvr/flow.hpp"

using namespace rlvr;

namespace {

Scenario rlvr_scenario(std::vector<double> rates, std::vector<double> ref, double beta, double horizon,
                       double step = 0.1, std::uint64_t stride = 1) {
  return Scenario{PatternTask::from_rates(rates), PolicyState::from_probs(ref), beta, horizon, step, stride, 0,
                  Mode::rlvr_flow, std::nullopt};
}

}  // namespace

TEST(FlowRhs, Examples) {
  const auto s = rlvr_scenario({0.8, 0.2}, {0.5, 0.5}, 0.0, 1);
  const auto g = flow_rhs(s, s.ref);
  EXPECT_NEAR(g[0], 0.15, 1e-15);
  EXPECT_NEAR(g[1], -0.15, 1e-15);

  const auto flat = rlvr_scenario({0.4, 0.4, 0.4}, {0.2, 0.3, 0.5}, 0.0, 1);
  for (double x : flow_rhs(flat, flat.ref).entries) EXPECT_EQ(x, 0.0);

  auto sft = s;
  sft.mode = Mode::sft_flow;
  sft.p_sft = std::vector{0.5, 0.5};
  for (double x : flow_rhs(sft, sft.ref).entries) EXPECT_EQ(x, 0.0);

  auto sampled = s;
  sampled.mode = Mode::sampled;
  try {
    flow_rhs(sampled, sampled.ref);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::wrong_mode);
  }
}

TEST(AccDerivative, Examples) {
  const auto t = PatternTask::from_rates(std::vector{0.8, 0.2});
  EXPECT_NEAR(acc_derivative(t, std::vector{0.5, 0.5}), 0.045, 1e-15);
  EXPECT_EQ(acc_derivative(t, std::vector{1.0, 0.0}), 0.0);
  EXPECT_EQ(acc_derivative(PatternTask::from_rates(std::vector{0.3, 0.3}), std::vector{0.4, 0.6}), 0.0);
}

TEST(AccDerivative, MatchesMicroEulerStep) {
  const auto s = rlvr_scenario({0.8, 0.2}, {0.5, 0.5}, 0.0, 1);
  const double h = 1e-7;
  auto next = s.ref;
  next.advance(flow_rhs(s, s.ref).entries, h);
  const double fd = (accuracy(s.task, next.probs()) - accuracy(s.task, s.ref.probs())) / h;
  EXPECT_NEAR(fd, 0.045, 1e-7);
}

TEST(Integrate, ConstantTrajectoryForEqualRates) {
  Scenario s{PatternTask::from_rates(std::vector{0.5, 0.5, 0.5}), PolicyState::from_probs(std::vector{0.2, 0.3, 0.5}),
             0.0, 50.0, 0.5, 1, 0, Mode::rlvr_flow, std::nullopt};
  const auto traj = integrate(s);
  for (const auto& smp : traj.samples)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(smp.probs[i], s.ref.prob(i), 1e-9);
  EXPECT_TRUE(traj.converged);
}

TEST(Integrate, RecordingGridAndStride) {
  const auto s = rlvr_scenario({0.9, 0.6, 0.1}, {0.5, 0.3, 0.2}, 0.0, 10.05, 0.1, 5);
  const auto traj = integrate(s);
  ASSERT_GE(traj.samples.size(), 3u);
  EXPECT_EQ(traj.samples.front().t, 0.0);
  EXPECT_NEAR(traj.samples[1].t, 0.5, 1e-12);
  EXPECT_EQ(traj.samples.back().t, 10.05);
  EXPECT_EQ(traj.end_time, 10.05);
  EXPECT_EQ(traj.accepted_steps, 101u);
  EXPECT_EQ(traj.scenario_digest, scenario_digest(s));
}

TEST(Integrate, Regime1ReachesOptimum) {
  const auto s = rlvr_scenario({0.9, 0.6, 0.1}, {0.5, 0.3, 0.2}, 0.0, 2000.0, 0.1, 100);
  const auto traj = integrate(s);
  EXPECT_GT(traj.samples.back().probs[0], 0.99);
}

TEST(Integrate, AgreesWithIndependentFixedStepRk4) {
  oracle::Rng rng(41);
  for (int n = 0; n < 10; ++n) {
    const std::size_t k = 2 + rng.index(4);
    const auto r = rng.rates(k);
    const auto ref = rng.dirichlet(k, 1.0, 0.02);
    const double beta = n % 2 ? 0.0 : rng.uniform(0.05, 1.0);
    Scenario s{PatternTask::from_rates(r), PolicyState::from_probs(ref), beta, 20.0, 0.1, 1, 0, Mode::rlvr_flow,
               std::nullopt};
    const auto traj = integrate(s);
    std::vector<double> z0(s.ref.logits().begin(), s.ref.logits().end());
    const auto z = oracle::rk4_fixed([&](const oracle::Vec& y) { return oracle::rlvr_logit_gradient(r, ref, beta, y); },
                                     z0, 20.0, 1e-3);
    const auto want = oracle::softmax_ld(z);
    EXPECT_LT(oracle::tv(traj.samples.back().probs, want), 1e-7) << "instance " << n;
  }
}

TEST(Integrate, KlRegularizedFlowReachesClosedForm) {
  auto s = rlvr_scenario({0.9, 0.1}, {0.5, 0.5}, 0.4, 1e4, 0.1, 1000);
  IntegrateOptions opt;
  opt.rhs_tolerance = 1e-10;
  const auto traj = integrate(s, opt);
  EXPECT_TRUE(traj.converged);
  EXPECT_LT(total_variation(traj.samples.back().probs, std::vector{0.880797077977882, 0.119202922022118}), 1e-4);
}

TEST(Integrate, StopEventEndsRun) {
  const auto s = rlvr_scenario({0.9, 0.6, 0.1}, {0.5, 0.3, 0.2}, 0.0, 1e6, 0.1, 1000);
  IntegrateOptions opt;
  opt.stop = StopEvent{0, 0.9};
  const auto traj = integrate(s, opt);
  EXPECT_TRUE(traj.stopped_on_event);
  EXPECT_GT(traj.samples.back().probs[0], 0.9);
  EXPECT_LT(traj.end_time, 100.0);
}

TEST(Integrate, InitialStateOverride) {
  const auto s = rlvr_scenario({0.9, 0.6, 0.1}, {0.5, 0.3, 0.2}, 0.0, 1.0);
  IntegrateOptions opt;
  opt.initial = PolicyState::from_probs(std::vector{0.1, 0.1, 0.8});
  const auto traj = integrate(s, opt);
  EXPECT_NEAR(traj.samples.front().probs[2], 0.8, 1e-15);
}

TEST(Integrate, SftFlowMatchesIndependentRk4) {
  const std::vector<double> p{0.7, 0.2, 0.1};
  Scenario s{PatternTask::from_rates(std::vector{0.9, 0.6, 0.1}), PolicyState::from_probs(std::vector{0.1, 0.3, 0.6}),
             0.0, 15.0, 0.1, 1, 0, Mode::sft_flow, p};
  const auto traj = integrate(s);
  std::vector<double> z0(s.ref.logits().begin(), s.ref.logits().end());
  const auto z = oracle::rk4_fixed(
      [&](const oracle::Vec& y) {
        const auto pi = oracle::softmax_ld(y);
        oracle::Vec d(3);
        for (int i = 0; i < 3; ++i) d[i] = p[i] - pi[i];
        return d;
      },
      z0, 15.0, 1e-3);
  EXPECT_LT(oracle::tv(traj.samples.back().probs, oracle::softmax_ld(z)), 1e-8);
}

TEST(Integrate, RejectsSampledMode) {
  auto s = rlvr_scenario({0.9, 0.1}, {0.5, 0.5}, 0.0, 1.0);
  s.mode = Mode::sampled;
  EXPECT_THROW(integrate(s), Error);
}

TEST(FirstCrossing, Examples) {
  const auto s = rlvr_scenario({0.9, 0.6, 0.1}, {0.5, 0.3, 0.2}, 0.0, 200.0, 0.01, 1);
  const auto traj = integrate(s);
  EXPECT_EQ(first_crossing(traj, CrossingKind::acc_above, std::nullopt, 0.5), 0.0);
  EXPECT_FALSE(first_crossing(traj, CrossingKind::acc_above, std::nullopt, 0.95));
  const auto t = first_crossing(traj, CrossingKind::acc_above, std::nullopt, 0.89);
  ASSERT_TRUE(t);
  // Re-integrate exactly to t_c and compare.
  auto to_tc = s;
  to_tc.horizon = *t;
  EXPECT_LT(std::abs(integrate(to_tc).samples.back().acc - 0.89), 1e-3);

  Scenario flat{PatternTask::from_rates(std::vector{0.3, 0.3}), PolicyState::uniform(2), 0.0, 5.0, 0.5, 1, 0,
                Mode::rlvr_flow, std::nullopt};
  EXPECT_FALSE(first_crossing(integrate(flat), CrossingKind::acc_above, std::nullopt, 0.4));
  EXPECT_THROW(first_crossing(traj, CrossingKind::pattern_prob_above, 7, 0.5), Error);
}

TEST(PolicyVelocity, IsSoftmaxJacobianProduct) {
  oracle::Rng rng(43);
  for (int n = 0; n < 50; ++n) {
    std::vector<double> z(4), v(4);
    for (double& x : z) x = rng.uniform(-2, 2);
    for (double& x : v) x = rng.uniform(-1, 1);
    const auto pi = oracle::softmax_ld(z);
    const auto got = policy_velocity(pi, v);
    const double h = 1e-6;
    for (std::size_t i = 0; i < 4; ++i) {
      oracle::Vec a = z, b = z;
      for (std::size_t j = 0; j < 4; ++j) {
        a[j] += h * v[j];
        b[j] -= h * v[j];
      }
      EXPECT_NEAR(got[i], (oracle::softmax_ld(a)[i] - oracle::softmax_ld(b)[i]) / (2 * h), 1e-8);
    }
  }
}
