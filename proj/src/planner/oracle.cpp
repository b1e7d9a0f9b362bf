#include "circuitrl/planner/oracle.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace circuitrl {

OracleResult oracle_episode(AblationEnv& env, std::uint64_t seed, TaskId task, std::size_t workers) {
  env.reset(seed, task);
  std::vector<int> all(static_cast<std::size_t>(env.n_actions()));
  std::iota(all.begin(), all.end(), 0);
  const std::vector<RewardBreakdown> scored = env.evaluate_many(all, workers);

  OracleResult r;
  r.seed = seed;
  r.task = task;
  for (const auto& s : scored) {
    r.rewards.push_back(s.reward);
    r.task_damage.push_back(s.task_damage);
    r.general_damage.push_back(s.general_damage);
  }
  r.best_action = static_cast<int>(std::max_element(r.rewards.begin(), r.rewards.end()) - r.rewards.begin());
  r.best_reward = r.rewards[static_cast<std::size_t>(r.best_action)];
  return r;
}

OracleRanking oracle_mean_ranking(const std::vector<OracleResult>& results) {
  if (results.empty()) throw std::invalid_argument("oracle ranking needs at least one episode");
  const std::size_t n = results.front().rewards.size();
  OracleRanking out;
  out.mean_reward.assign(n, 0.0);
  for (const auto& r : results) {
    if (r.rewards.size() != n) throw std::invalid_argument("oracle episodes cover different action counts");
    for (std::size_t a = 0; a < n; ++a) out.mean_reward[a] += r.rewards[a];
    out.ceiling += r.best_reward;
  }
  for (double& m : out.mean_reward) m /= static_cast<double>(results.size());
  out.ceiling /= static_cast<double>(results.size());

  out.order.resize(n);
  std::iota(out.order.begin(), out.order.end(), 0);
  std::stable_sort(out.order.begin(), out.order.end(), [&](int x, int y) {
    return out.mean_reward[static_cast<std::size_t>(x)] > out.mean_reward[static_cast<std::size_t>(y)];
  });
  out.rank.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) out.rank[static_cast<std::size_t>(out.order[i])] = static_cast<int>(i + 1);
  return out;
}

}  // namespace circuitrl
