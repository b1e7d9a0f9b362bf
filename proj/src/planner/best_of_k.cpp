#include "circuitrl/planner/best_of_k.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "circuitrl/common.hpp"

namespace circuitrl {

namespace {

int count_legal(std::span<const std::uint8_t> mask) {
  return static_cast<int>(std::count_if(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }));
}

void check_k(int k, std::span<const std::uint8_t> mask) {
  const int legal = count_legal(mask);
  if (k < 1 || k > legal) {
    throw ContractViolation("planner asked for " + std::to_string(k) + " candidates with " + std::to_string(legal) +
                            " legal actions");
  }
}

}  // namespace

std::vector<int> sample_without_replacement(const ActionDistribution& dist, std::span<const std::uint8_t> mask, int k,
                                            std::mt19937_64& rng) {
  if (mask.size() != dist.probs.size()) throw std::invalid_argument("mask and distribution sizes differ");
  check_k(k, mask);
  std::vector<double> weights = dist.probs;
  for (std::size_t a = 0; a < weights.size(); ++a) {
    if (!mask[a]) weights[a] = 0.0;
  }
  std::vector<std::uint8_t> available(mask.begin(), mask.end());
  std::vector<int> out;
  while (static_cast<int>(out.size()) < k) {
    const double mass = std::accumulate(weights.begin(), weights.end(), 0.0);
    int a;
    if (mass > 0.0) {
      std::discrete_distribution<int> pick(weights.begin(), weights.end());
      a = pick(rng);
    } else {
      std::vector<int> rest;
      for (std::size_t i = 0; i < available.size(); ++i) {
        if (available[i]) rest.push_back(static_cast<int>(i));
      }
      std::uniform_int_distribution<std::size_t> pick(0, rest.size() - 1);
      a = rest[pick(rng)];
    }
    out.push_back(a);
    weights[static_cast<std::size_t>(a)] = 0.0;
    available[static_cast<std::size_t>(a)] = 0;
  }
  return out;
}

std::vector<int> top_k(const ActionDistribution& dist, std::span<const std::uint8_t> mask, int k) {
  check_k(k, mask);
  std::vector<int> legal;
  for (std::size_t a = 0; a < mask.size(); ++a) {
    if (mask[a]) legal.push_back(static_cast<int>(a));
  }
  std::stable_sort(legal.begin(), legal.end(), [&](int x, int y) {
    return dist.probs[static_cast<std::size_t>(x)] > dist.probs[static_cast<std::size_t>(y)];
  });
  legal.resize(static_cast<std::size_t>(k));
  return legal;
}

ActionDistribution uniform_distribution(std::span<const std::uint8_t> mask) {
  const int legal = count_legal(mask);
  if (legal == 0) throw ContractViolation("action mask has no legal action");
  ActionDistribution d;
  d.masked_logits.assign(mask.size(), 0.0);
  d.probs.assign(mask.size(), 0.0);
  d.log_probs.assign(mask.size(), -1e9);
  for (std::size_t a = 0; a < mask.size(); ++a) {
    if (mask[a]) {
      d.probs[a] = 1.0 / legal;
      d.log_probs[a] = -std::log(static_cast<double>(legal));
    } else {
      d.masked_logits[a] = -1e9;
    }
  }
  return d;
}

PlanStep plan_step(AblationEnv& env, const ActionDistribution& dist, const PlannerConfig& cfg, std::mt19937_64& rng) {
  const std::vector<std::uint8_t> mask = env.action_mask();
  PlanStep ps;
  ps.candidates = cfg.greedy ? top_k(dist, mask, cfg.k) : sample_without_replacement(dist, mask, cfg.k, rng);
  if (cfg.k == 1) {
    ps.committed = ps.candidates[0];
  } else {
    const std::vector<RewardBreakdown> scored = env.evaluate_many(ps.candidates, cfg.workers);
    int best = -1;
    double best_reward = 0.0;
    for (std::size_t i = 0; i < scored.size(); ++i) {
      const int a = ps.candidates[i];
      const double r = scored[i].reward;
      ps.candidate_rewards.push_back(r);
      if (best < 0 || r > best_reward || (r == best_reward && a < best)) {
        best = a;
        best_reward = r;
      }
    }
    ps.committed = best;
  }
  ps.outcome = env.step(ps.committed);
  if (cfg.k == 1) ps.candidate_rewards.push_back(ps.outcome.reward);
  return ps;
}

PlanStep best_of_k(const PolicyParams& params, AblationEnv& env, const PlannerConfig& cfg, std::mt19937_64& rng) {
  const std::vector<double> obs = env.observation().flatten();
  const PolicyOutput out = policy_forward(params, obs, env.action_mask());
  return plan_step(env, out.dist, cfg, rng);
}

}  // namespace circuitrl
