#pragma once

// Finite-sample policy-gradient training on the tabular model: episodes draw
// a pattern from pi and a Bernoulli(p_succ) reward, and the score-function
// estimate drives the logits. The KL term is applied exactly.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rlvr/digest.hpp"
#include "rlvr/error.hpp"
#include "rlvr/flow.hpp"
#include "rlvr/model.hpp"
#include "rlvr/objectives.hpp"
#include "rlvr/rng.hpp"

namespace rlvr {

enum class Baseline { none, batch_mean };

struct SamplerConfig {
  std::uint64_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t steps = 1000;
  double beta = 0.0;
  Baseline baseline = Baseline::none;
  std::uint64_t seed = 0;
};

inline void validate(const SamplerConfig& c) {
  require(c.batch_size >= 1, ErrorCode::validation, "batch_size must be at least 1");
  require(std::isfinite(c.learning_rate) && c.learning_rate > 0.0, ErrorCode::validation,
          "learning_rate must be positive");
  require(c.steps >= 1, ErrorCode::validation, "steps must be at least 1");
  require(std::isfinite(c.beta) && c.beta >= 0.0, ErrorCode::validation, "beta must be non-negative");
}

struct Episode {
  std::size_t pattern = 0;
  int reward = 0;
};

inline Episode sample_episode(const PatternTask& task, const PolicyState& state, RandomStream& rng) {
  require(state.size() == task.size(), ErrorCode::invalid_input, "state does not match task");
  Episode e;
  e.pattern = rng.categorical(state.probs());
  e.reward = rng.bernoulli(task.success_rate(e.pattern)) ? 1 : 0;
  return e;
}

/// Batch score-function estimate of rlvr_grad:
/// mean_b (R_b - baseline)(e_{r_b} - pi) plus the exact KL gradient.
inline GradientVector estimate_gradient(const PatternTask& task, const PolicyState& state, const PolicyState& ref,
                                        const SamplerConfig& config, RandomStream& rng) {
  const std::size_t k = task.size();
  std::vector<std::size_t> picks(config.batch_size);
  std::vector<int> rewards(config.batch_size);
  double mean_reward = 0.0;
  for (std::size_t b = 0; b < config.batch_size; ++b) {
    const auto e = sample_episode(task, state, rng);
    picks[b] = e.pattern;
    rewards[b] = e.reward;
    mean_reward += e.reward;
  }
  mean_reward /= static_cast<double>(config.batch_size);
  const double baseline = config.baseline == Baseline::batch_mean ? mean_reward : 0.0;

  // sum_b A_b (e_{r_b} - pi) = counts_weighted - (sum_b A_b) pi
  GradientVector g{std::vector<double>(k, 0.0)};
  double total_adv = 0.0;
  for (std::size_t b = 0; b < config.batch_size; ++b) {
    const double adv = rewards[b] - baseline;
    g[picks[b]] += adv;
    total_adv += adv;
  }
  const auto pi = state.probs();
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
  for (std::size_t i = 0; i < k; ++i) g[i] = (g[i] - total_adv * pi[i]) * inv_batch;

  if (config.beta > 0.0) {
    // The exact gradient minus its accuracy part is the KL part.
    const auto full = rlvr_grad(task, state, ref, config.beta);
    const double acc = accuracy(task, pi);
    for (std::size_t i = 0; i < k; ++i) g[i] += full[i] - pi[i] * (task.success_rate(i) - acc);
  }
  return g;
}

inline PolicyState reinforce_step(const PatternTask& task, const PolicyState& state, const PolicyState& ref,
                                  const SamplerConfig& config, RandomStream& rng) {
  validate(config);
  const auto g = estimate_gradient(task, state, ref, config, rng);
  PolicyState next = state;
  next.advance(g, config.learning_rate);
  return next;
}

/// Thrown when the logits leave the finite range; carries the last good state.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, PolicyState last_valid)
      : Error(ErrorCode::training_diverged, what), last_valid_(std::move(last_valid)) {}
  const PolicyState& last_valid() const noexcept { return last_valid_; }

 private:
  PolicyState last_valid_;
};

/// Runs config.steps updates from theta_ref. Sample k sits at flow time
/// step_count * learning_rate; dacc is the exact flow rate at that state.
inline Trajectory train_sampler(const Scenario& scenario, const SamplerConfig& config,
                                std::uint64_t stream_index = 0) {
  validate(scenario);
  validate(config);
  require(scenario.mode == Mode::sampled, ErrorCode::wrong_mode, "train_sampler needs a sampled scenario");
  require(config.beta == scenario.beta, ErrorCode::invalid_input, "sampler beta differs from scenario beta");

  Trajectory traj;
  traj.mode = Mode::sampled;
  traj.pattern_count = scenario.task.size();
  traj.scenario_digest = scenario_digest(scenario);

  RandomStream rng(config.seed, StreamPurpose::training, stream_index);
  PolicyState state = scenario.ref;
  auto record = [&](std::uint64_t step) {
    Sample s;
    s.t = static_cast<double>(step) * config.learning_rate;
    s.probs.assign(state.probs().begin(), state.probs().end());
    s.acc = accuracy(scenario.task, s.probs);
    s.dacc = accuracy_rate(scenario.task, s.probs, rlvr_grad(scenario.task, state, scenario.ref, scenario.beta));
    traj.samples.push_back(std::move(s));
  };
  record(0);
  for (std::uint64_t step = 1; step <= config.steps; ++step) {
    const auto g = estimate_gradient(scenario.task, state, scenario.ref, config, rng);
    std::vector<double> next(state.logits().begin(), state.logits().end());
    bool finite = true;
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] += config.learning_rate * g[i];
      finite = finite && std::isfinite(next[i]);
    }
    if (!finite) throw TrainingDiverged("non-finite logits at step " + std::to_string(step), state);
    state.set_logits(next);
    if (step % scenario.record_stride == 0 || step == config.steps) record(step);
  }
  traj.accepted_steps = config.steps;
  traj.end_time = static_cast<double>(config.steps) * config.learning_rate;
  return traj;
}

}  // namespace rlvr
