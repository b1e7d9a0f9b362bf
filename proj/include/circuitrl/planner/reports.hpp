#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "circuitrl/planner/evaluation.hpp"
#include "circuitrl/planner/oracle.hpp"

namespace circuitrl {

struct HeadPicks {
  int action = 0;
  int count = 0;
  double mean_reward = 0.0;  // over the picks of this head
  std::optional<int> rank;   // 1-based; absent when never picked
};

// Heads by descending pick count, then descending mean reward, then action
// index. Only picked heads are ranked.
struct PickRanking {
  std::vector<HeadPicks> by_action;
  std::vector<int> order;
  int total_picks = 0;

  std::optional<int> rank_of(int action) const { return by_action.at(static_cast<std::size_t>(action)).rank; }
  std::vector<int> top(int n) const;
};

PickRanking pick_frequency(const std::vector<EpisodeLog>& logs, int n_actions = 144);

struct CanonicalSets {
  std::vector<HeadIndex> induction;
  std::vector<std::pair<std::string, std::vector<HeadIndex>>> ioi;  // in display order

  // {"induction": [...], "ioi": {category: [...]}, "ioi_order": [...]}
  static CanonicalSets load(const std::filesystem::path& path);
  static std::filesystem::path bundled_path();
};

struct CanonicalHeadRow {
  std::string set;  // "induction" or an IOI category
  HeadIndex head;
  std::optional<int> policy_rank;
  std::optional<int> oracle_rank;
};

struct CategoryOverlap {
  std::string category;
  int size = 0;
  int overlap = 0;  // members among the policy's top_n
};

struct CanonicalReport {
  std::vector<CanonicalHeadRow> heads;
  std::vector<CategoryOverlap> categories;
};

// Ranks of the given heads under a policy ranking and (optionally) an oracle
// mean-score ranking.
std::vector<CanonicalHeadRow> canonical_head_ranks(const std::string& set, const std::vector<HeadIndex>& heads,
                                                   const PickRanking& policy, const OracleRanking* oracle);

std::vector<CategoryOverlap> category_overlap(const PickRanking& policy, const CanonicalSets& sets, int top_n = 10);

// Rows for every canonical head plus the per-category overlaps of `policy`.
CanonicalReport compare_canonical(const PickRanking& policy, const OracleRanking* oracle, const CanonicalSets& sets,
                                  int top_n = 10);

// CSV tables built from evaluation and oracle logs. Each returns false and
// writes nothing when the logs hold none of the records it needs.
bool write_oracle_table(const LogBundle& logs, std::ostream& out);                                 // policy vs oracle per task
bool write_induction_table(const LogBundle& logs, const CanonicalSets& sets, std::ostream& out);   // induction head ranks
bool write_ioi_table(const LogBundle& logs, const CanonicalSets& sets, std::ostream& out);         // IOI category overlap
bool write_transfer_table(const LogBundle& logs, std::ostream& out);                               // zero-shot transfer

// Writes table1_oracle.csv ... table4_transfer.csv into `dir`; returns the
// files written.
std::vector<std::filesystem::path> write_reports(const LogBundle& logs, const CanonicalSets& sets,
                                                 const std::filesystem::path& dir);

}  // namespace circuitrl
