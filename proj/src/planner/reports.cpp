#include "circuitrl/planner/reports.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "circuitrl/common.hpp"

namespace circuitrl {

std::vector<int> PickRanking::top(int n) const {
  const auto m = std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(n, 0)));
  return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m)};
}

PickRanking pick_frequency(const std::vector<EpisodeLog>& logs, int n_actions) {
  PickRanking r;
  r.by_action.resize(static_cast<std::size_t>(n_actions));
  std::vector<double> sums(static_cast<std::size_t>(n_actions), 0.0);
  for (int a = 0; a < n_actions; ++a) r.by_action[static_cast<std::size_t>(a)].action = a;
  for (const auto& log : logs) {
    for (std::size_t i = 0; i < log.picks.size(); ++i) {
      const int a = log.picks[i].action();
      if (a < 0 || a >= n_actions) throw std::out_of_range("pick outside the action range");
      r.by_action[static_cast<std::size_t>(a)].count += 1;
      sums[static_cast<std::size_t>(a)] += log.rewards[i];
      ++r.total_picks;
    }
  }
  for (auto& h : r.by_action) {
    if (h.count > 0) {
      h.mean_reward = sums[static_cast<std::size_t>(h.action)] / h.count;
      r.order.push_back(h.action);
    }
  }
  std::sort(r.order.begin(), r.order.end(), [&](int x, int y) {
    const HeadPicks& a = r.by_action[static_cast<std::size_t>(x)];
    const HeadPicks& b = r.by_action[static_cast<std::size_t>(y)];
    if (a.count != b.count) return a.count > b.count;
    if (a.mean_reward != b.mean_reward) return a.mean_reward > b.mean_reward;
    return x < y;
  });
  for (std::size_t i = 0; i < r.order.size(); ++i) {
    r.by_action[static_cast<std::size_t>(r.order[i])].rank = static_cast<int>(i + 1);
  }
  return r;
}

std::filesystem::path CanonicalSets::bundled_path() {
  return std::filesystem::path(CIRCUITRL_DATA_DIR) / "canonical_heads.json";
}

CanonicalSets CanonicalSets::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open canonical head sets " + path.string());
  CanonicalSets s;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& label : j.at("induction")) s.induction.push_back(HeadIndex::parse(label.get<std::string>()));
    const auto& ioi = j.at("ioi");
    std::vector<std::string> order;
    if (j.contains("ioi_order")) {
      order = j["ioi_order"].get<std::vector<std::string>>();
    } else {
      for (const auto& [k, v] : ioi.items()) order.push_back(k);
    }
    if (order.size() != ioi.size()) throw FormatError("ioi_order does not list every IOI category");
    for (const auto& name : order) {
      std::vector<HeadIndex> members;
      for (const auto& label : ioi.at(name)) members.push_back(HeadIndex::parse(label.get<std::string>()));
      s.ioi.emplace_back(name, std::move(members));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return s;
}

std::vector<CanonicalHeadRow> canonical_head_ranks(const std::string& set, const std::vector<HeadIndex>& heads,
                                                   const PickRanking& policy, const OracleRanking* oracle) {
  std::vector<CanonicalHeadRow> rows;
  for (const auto& h : heads) {
    CanonicalHeadRow row{set, h, std::nullopt, std::nullopt};
    if (h.action() < static_cast<int>(policy.by_action.size())) row.policy_rank = policy.rank_of(h.action());
    if (oracle && h.action() < static_cast<int>(oracle->rank.size())) {
      row.oracle_rank = oracle->rank[static_cast<std::size_t>(h.action())];
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<CategoryOverlap> category_overlap(const PickRanking& policy, const CanonicalSets& sets, int top_n) {
  const std::vector<int> top = policy.top(top_n);
  std::vector<CategoryOverlap> out;
  for (const auto& [name, members] : sets.ioi) {
    CategoryOverlap c{name, static_cast<int>(members.size()), 0};
    for (const auto& h : members) {
      if (std::find(top.begin(), top.end(), h.action()) != top.end()) ++c.overlap;
    }
    out.push_back(c);
  }
  return out;
}

CanonicalReport compare_canonical(const PickRanking& policy, const OracleRanking* oracle, const CanonicalSets& sets,
                                  int top_n) {
  CanonicalReport r;
  r.heads = canonical_head_ranks("induction", sets.induction, policy, oracle);
  for (const auto& [name, members] : sets.ioi) {
    const auto rows = canonical_head_ranks(name, members, policy, oracle);
    r.heads.insert(r.heads.end(), rows.begin(), rows.end());
  }
  r.categories = category_overlap(policy, sets, top_n);
  return r;
}

namespace {

std::string rank_cell(const std::optional<int>& r) { return r ? std::to_string(*r) : "--"; }

std::string num(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << x;
  return s.str();
}

// Trained-policy K=1 episodes of `task` under its own task signal.
std::vector<EpisodeLog> natural_runs(const LogBundle& logs, TaskId task) {
  std::vector<EpisodeLog> out;
  for (const auto& e : logs.episodes) {
    if (e.task == task && e.k == 1 && e.mode != EvalMode::Random && e.onehot == task_onehot(task)) out.push_back(e);
  }
  return out;
}

std::vector<OracleResult> oracles_for(const LogBundle& logs, TaskId task) {
  std::vector<OracleResult> out;
  for (const auto& o : logs.oracles) {
    if (o.task == task) out.push_back(o);
  }
  return out;
}

int action_count(const LogBundle& logs) {
  int n = 144;
  for (const auto& o : logs.oracles) n = std::max(n, static_cast<int>(o.rewards.size()));
  return n;
}

}  // namespace

bool write_oracle_table(const LogBundle& logs, std::ostream& out) {
  std::ostringstream body;
  bool any = false;
  for (TaskId task : {TaskId::Induction, TaskId::IOI, TaskId::Docstring}) {
    const auto runs = natural_runs(logs, task);
    const auto oracles = oracles_for(logs, task);
    if (runs.empty() && oracles.empty()) continue;
    any = true;
    std::string label(task_name(task));
    if (task == TaskId::Docstring) label += " (held-out)";
    const std::string policy = runs.empty() ? "" : num(summarize(runs).mean_running_max);
    const std::string oracle = oracles.empty() ? "" : num(oracle_mean_ranking(oracles).ceiling);
    std::string gap;
    if (!runs.empty() && !oracles.empty()) {
      const double g = summarize(runs).mean_running_max - oracle_mean_ranking(oracles).ceiling;
      gap = (g >= 0 ? "+" : "") + num(g);
    }
    body << label << ',' << policy << ',' << oracle << ',' << gap << ',' << runs.size() << ',' << oracles.size()
         << '\n';
  }
  if (!any) return false;
  out << "task,policy,oracle,gap,policy_episodes,oracle_episodes\n" << body.str();
  return true;
}

bool write_induction_table(const LogBundle& logs, const CanonicalSets& sets, std::ostream& out) {
  const auto runs = natural_runs(logs, TaskId::Induction);
  const auto oracles = oracles_for(logs, TaskId::Induction);
  if (runs.empty() && oracles.empty()) return false;
  const int n = action_count(logs);
  const PickRanking policy = pick_frequency(runs, n);
  std::optional<OracleRanking> oracle;
  if (!oracles.empty()) oracle = oracle_mean_ranking(oracles);
  auto rows = canonical_head_ranks("induction", sets.induction, policy, oracle ? &*oracle : nullptr);
  // Policy rank first, then oracle rank; unranked heads last.
  std::stable_sort(rows.begin(), rows.end(), [](const CanonicalHeadRow& a, const CanonicalHeadRow& b) {
    const int ra = a.policy_rank.value_or(1 << 20), rb = b.policy_rank.value_or(1 << 20);
    if (ra != rb) return ra < rb;
    return a.oracle_rank.value_or(1 << 20) < b.oracle_rank.value_or(1 << 20);
  });
  out << "canonical_head,policy_rank,oracle_rank\n";
  for (const auto& r : rows) {
    out << r.head.label() << ',' << rank_cell(r.policy_rank) << ',' << (oracle ? rank_cell(r.oracle_rank) : "")
        << '\n';
  }
  return true;
}

bool write_ioi_table(const LogBundle& logs, const CanonicalSets& sets, std::ostream& out) {
  const auto runs = natural_runs(logs, TaskId::IOI);
  if (runs.empty()) return false;
  const PickRanking policy = pick_frequency(runs, action_count(logs));
  out << "sub_category,canon_size,overlap_top10\n";
  for (const auto& c : category_overlap(policy, sets, 10)) {
    out << c.category << ',' << c.size << ',' << c.overlap << '\n';
  }
  return true;
}

bool write_transfer_table(const LogBundle& logs, std::ostream& out) {
  struct Row {
    std::string label;
    bool random;
    std::array<double, 2> onehot;
  };
  const std::vector<Row> rows = {
      {"Random baseline", true, {0, 0}},
      {"Trained policy zero-shot [0,0]", false, {0, 0}},
      {"Trained policy primed as induction [1,0]", false, {1, 0}},
      {"Trained policy primed as IOI [0,1]", false, {0, 1}},
  };
  auto cell = [&](const Row& row, int k) -> std::string {
    std::vector<EpisodeLog> sel;
    for (const auto& e : logs.episodes) {
      if (e.task != TaskId::Docstring || e.k != k) continue;
      if ((e.mode == EvalMode::Random) != row.random) continue;
      if (!row.random && e.onehot != row.onehot) continue;
      sel.push_back(e);
    }
    return sel.empty() ? "" : num(summarize(sel).mean_running_max);
  };
  const auto oracles = oracles_for(logs, TaskId::Docstring);
  std::ostringstream body;
  bool any = !oracles.empty();
  for (const auto& row : rows) {
    const std::string k1 = cell(row, 1), k5 = cell(row, 5);
    any = any || !k1.empty() || !k5.empty();
    body << row.label << ',' << k1 << ',' << k5 << '\n';
  }
  if (!any) return false;
  const std::string ceiling = oracles.empty() ? "" : num(oracle_mean_ranking(oracles).ceiling);
  out << "condition,k1,k5\n" << body.str() << "Oracle ceiling," << ceiling << ',' << ceiling << '\n';
  return true;
}

std::vector<std::filesystem::path> write_reports(const LogBundle& logs, const CanonicalSets& sets,
                                                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const char* name, auto&& fn) {
    std::ostringstream s;
    if (!fn(s)) return;
    const auto path = dir / name;
    std::ofstream f(path);
    if (!f) throw FormatError("cannot write " + path.string());
    f << s.str();
    written.push_back(path);
  };
  emit("table1_oracle.csv", [&](std::ostream& o) { return write_oracle_table(logs, o); });
  emit("table2_induction.csv", [&](std::ostream& o) { return write_induction_table(logs, sets, o); });
  emit("table3_ioi.csv", [&](std::ostream& o) { return write_ioi_table(logs, sets, o); });
  emit("table4_transfer.csv", [&](std::ostream& o) { return write_transfer_table(logs, o); });
  return written;
}

}  // namespace circuitrl
