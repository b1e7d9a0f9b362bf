#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "circuitrl/common.hpp"
#include "circuitrl/planner/reports.hpp"
#include "test_support.hpp"

using namespace circuitrl;

namespace {

EpisodeLog episode(TaskId task, std::vector<int> picks, std::vector<double> rewards, int k = 1,
                   EvalMode mode = EvalMode::Sample) {
  EpisodeLog e;
  e.task = task;
  e.onehot = task_onehot(task);
  e.k = k;
  e.mode = mode;
  double m = -1e300;
  for (std::size_t i = 0; i < picks.size(); ++i) {
    e.picks.push_back(HeadIndex::from_action(picks[i]));
    e.rewards.push_back(rewards[i]);
    m = std::max(m, rewards[i]);
    e.running_max.push_back(m);
  }
  return e;
}

OracleResult oracle(TaskId task, int best, double best_reward) {
  OracleResult o;
  o.task = task;
  o.rewards.assign(144, 0.0);
  o.task_damage.assign(144, 0.0);
  o.general_damage.assign(144, 0.0);
  o.rewards[static_cast<std::size_t>(best)] = best_reward;
  o.best_action = best;
  o.best_reward = best_reward;
  return o;
}

}  // namespace

TEST(PickFrequency, SingleEpisode) {
  const PickRanking r = pick_frequency({episode(TaskId::Induction, {65}, {2.0})});
  EXPECT_EQ(r.total_picks, 1);
  EXPECT_EQ(r.rank_of(65), 1);
  EXPECT_FALSE(r.rank_of(0).has_value());
  EXPECT_EQ(r.top(10), (std::vector<int>{65}));
}

TEST(PickFrequency, CountsAndTieBreaks) {
  const std::vector<EpisodeLog> logs = {
      episode(TaskId::Induction, {5, 9, 3}, {1.0, 0.5, 0.2}),
      episode(TaskId::Induction, {9, 5, 7}, {0.7, 1.0, 0.9}),
  };
  const PickRanking r = pick_frequency(logs);
  int total = 0;
  for (const auto& h : r.by_action) total += h.count;
  EXPECT_EQ(total, r.total_picks);
  EXPECT_EQ(total, 6);
  // 5 and 9 picked twice; 5 has the higher mean reward. 3 and 7 once; 7 higher.
  EXPECT_EQ(r.order, (std::vector<int>{5, 9, 7, 3}));
  EXPECT_DOUBLE_EQ(r.by_action[9].mean_reward, 0.6);

  const PickRanking tie = pick_frequency({episode(TaskId::IOI, {8, 2}, {1.0, 1.0})});
  EXPECT_EQ(tie.order, (std::vector<int>{2, 8}));
}

TEST(Canonical, BundledSets) {
  const CanonicalSets s = CanonicalSets::load(CanonicalSets::bundled_path());
  EXPECT_EQ(s.induction.size(), 5u);
  EXPECT_EQ(s.induction[1].label(), "L5.H5");
  ASSERT_EQ(s.ioi.size(), 7u);
  const std::vector<std::size_t> sizes{4, 4, 8, 3, 2, 3, 2};
  for (std::size_t i = 0; i < sizes.size(); ++i) EXPECT_EQ(s.ioi[i].second.size(), sizes[i]) << s.ioi[i].first;
  EXPECT_EQ(s.ioi[0].first, "S-Inhibition");
}

TEST(Canonical, OverlapBounds) {
  const CanonicalSets s = CanonicalSets::load(CanonicalSets::bundled_path());
  std::vector<int> picks;
  std::vector<double> rewards;
  for (const auto& h : s.ioi[3].second) {  // name movers
    picks.push_back(h.action());
    rewards.push_back(1.0);
  }
  picks.push_back(0);
  rewards.push_back(0.0);
  const PickRanking r = pick_frequency({episode(TaskId::IOI, picks, rewards)});
  const auto overlaps = category_overlap(r, s, 10);
  for (const auto& c : overlaps) {
    EXPECT_GE(c.overlap, 0);
    EXPECT_LE(c.overlap, std::min(c.size, 10));
  }
  EXPECT_EQ(overlaps[3].overlap, 3);
  EXPECT_EQ(overlaps[0].overlap, 0);

  OracleRanking o;
  o.rank.assign(144, 144);
  o.rank[static_cast<std::size_t>(s.induction[0].action())] = 1;
  const CanonicalReport rep = compare_canonical(r, &o, s, 10);
  EXPECT_EQ(rep.heads.size(), 5u + 4 + 4 + 8 + 3 + 2 + 3 + 2);
  EXPECT_EQ(rep.heads[0].oracle_rank, 1);
  EXPECT_FALSE(rep.heads[0].policy_rank.has_value());
}

TEST(Reports, JsonlRoundTrip) {
  const auto dir = circuitrl::testing::temp_dir("logs");
  EpisodeLog e = episode(TaskId::Docstring, {65, 40}, {1.5, 2.25}, 5, EvalMode::Greedy);
  e.seed = 10'000'003;
  e.onehot = {1.0, 0.0};
  OracleResult o = oracle(TaskId::IOI, 106, 3.5);
  o.seed = 10'000'000;
  {
    std::ofstream out(dir / "a.jsonl");
    out << episode_to_json(e) << '\n' << oracle_to_json(o) << '\n';
  }
  const LogBundle b = read_logs({dir / "a.jsonl"});
  ASSERT_EQ(b.episodes.size(), 1u);
  ASSERT_EQ(b.oracles.size(), 1u);
  const EpisodeLog& back = b.episodes[0];
  EXPECT_EQ(back.seed, e.seed);
  EXPECT_EQ(back.task, TaskId::Docstring);
  EXPECT_EQ(back.onehot, e.onehot);
  EXPECT_EQ(back.k, 5);
  EXPECT_EQ(back.mode, EvalMode::Greedy);
  EXPECT_EQ(back.picks, e.picks);
  EXPECT_EQ(back.rewards, e.rewards);
  EXPECT_EQ(back.running_max, e.running_max);
  EXPECT_EQ(b.oracles[0].best_action, 106);
  EXPECT_EQ(b.oracles[0].rewards, o.rewards);

  {
    std::ofstream out(dir / "bad.jsonl");
    out << "{\"kind\": \"mystery\"}\n";
  }
  EXPECT_THROW(read_logs({dir / "bad.jsonl"}), FormatError);
}

TEST(Reports, RegimeLabels) {
  EXPECT_EQ(regime_label({0, 0}), "[0,0]");
  EXPECT_EQ(regime_label({0, 1}), "[0,1]");
  EXPECT_EQ(parse_regime("[1,0]"), (std::array<double, 2>{1, 0}));
  EXPECT_EQ(parse_regime("ioi"), (std::array<double, 2>{0, 1}));
  EXPECT_EQ(parse_regime("zero-shot"), (std::array<double, 2>{0, 0}));
  EXPECT_THROW(parse_regime("[2,0]"), std::invalid_argument);
}

TEST(Reports, CsvTables) {
  LogBundle logs;
  logs.episodes.push_back(episode(TaskId::Induction, {65, 3}, {2.0, 0.5}));
  logs.episodes.push_back(episode(TaskId::Induction, {65, 86}, {2.0, 2.5}));
  // Not a natural run: primed with the wrong signal.
  EpisodeLog primed = episode(TaskId::Induction, {1}, {9.0});
  primed.onehot = {0, 1};
  logs.episodes.push_back(primed);
  logs.episodes.push_back(episode(TaskId::IOI, {106, 93, 5}, {3.0, 2.0, 0.1}));
  EpisodeLog rnd = episode(TaskId::Docstring, {1}, {0.5}, 1, EvalMode::Random);
  rnd.onehot = {0, 0};
  logs.episodes.push_back(rnd);
  EpisodeLog zs = episode(TaskId::Docstring, {65}, {2.0}, 5);
  logs.episodes.push_back(zs);
  logs.oracles.push_back(oracle(TaskId::Induction, 65, 3.0));
  logs.oracles.push_back(oracle(TaskId::Docstring, 65, 2.5));

  const CanonicalSets sets = CanonicalSets::load(CanonicalSets::bundled_path());
  std::ostringstream t1, t2, t3, t4;
  ASSERT_TRUE(write_oracle_table(logs, t1));
  EXPECT_NE(t1.str().find("task,policy,oracle,gap,policy_episodes,oracle_episodes\n"), std::string::npos);
  EXPECT_NE(t1.str().find("induction,2.250,3.000,-0.750,2,1\n"), std::string::npos) << t1.str();
  EXPECT_NE(t1.str().find("ioi,3.000,,,1,0\n"), std::string::npos) << t1.str();

  ASSERT_TRUE(write_induction_table(logs, sets, t2));
  EXPECT_EQ(t2.str().substr(0, t2.str().find('\n')), "canonical_head,policy_rank,oracle_rank");
  EXPECT_NE(t2.str().find("L5.H5,1,1\n"), std::string::npos) << t2.str();
  EXPECT_NE(t2.str().find("L5.H1,--,"), std::string::npos) << t2.str();

  ASSERT_TRUE(write_ioi_table(logs, sets, t3));
  EXPECT_NE(t3.str().find("S-Inhibition,4,2\n"), std::string::npos) << t3.str();
  EXPECT_NE(t3.str().find("Induction-in-IOI,4,0\n"), std::string::npos) << t3.str();

  ASSERT_TRUE(write_transfer_table(logs, t4));
  EXPECT_NE(t4.str().find("Random baseline,0.500,\n"), std::string::npos) << t4.str();
  EXPECT_NE(t4.str().find("Trained policy zero-shot [0,0],,2.000\n"), std::string::npos) << t4.str();
  EXPECT_NE(t4.str().find("Oracle ceiling,2.500,2.500\n"), std::string::npos) << t4.str();

  const auto dir = circuitrl::testing::temp_dir("reports");
  EXPECT_EQ(write_reports(logs, sets, dir).size(), 4u);
  EXPECT_TRUE(std::filesystem::exists(dir / "table4_transfer.csv"));
  EXPECT_TRUE(write_reports(LogBundle{}, sets, dir / "empty").empty());
}
