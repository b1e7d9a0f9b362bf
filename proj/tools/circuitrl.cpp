#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "circuitrl/common.hpp"
#include "circuitrl/env/ablation_env.hpp"
#include "circuitrl/model/model.hpp"
#include "circuitrl/planner/evaluation.hpp"
#include "circuitrl/planner/oracle.hpp"
#include "circuitrl/planner/reports.hpp"
#include "circuitrl/policy/checkpoint.hpp"
#include "circuitrl/ppo/trainer.hpp"
#include "circuitrl/tasks/task_suite.hpp"

namespace fs = std::filesystem;
using namespace circuitrl;

namespace {

struct StackOptions {
  std::string weights;
  bool infer_architecture = false;
  std::string tokenizer_dir = std::string(CIRCUITRL_DATA_DIR) + "/tokenizer";
  std::string pools_dir = std::string(CIRCUITRL_DATA_DIR) + "/pools";
  std::string corpus = std::string(CIRCUITRL_DATA_DIR) + "/corpus/moby_dick_excerpt.txt";
  TaskConfig task;
  EnvConfig env;
  std::size_t workers = 1;
};

void add_stack_options(CLI::App* cmd, StackOptions& o) {
  cmd->add_option("--weights", o.weights, "GPT-2 weight file (safetensors); defaults to $CIRCUITRL_GPT2_WEIGHTS");
  cmd->add_flag("--infer-architecture", o.infer_architecture,
                "take the architecture from the weight file instead of requiring GPT-2 small");
  cmd->add_option("--tokenizer-dir", o.tokenizer_dir, "directory with vocab.json and merges.txt");
  cmd->add_option("--pools-dir", o.pools_dir, "directory with the word-pool JSON files");
  cmd->add_option("--corpus", o.corpus, "UTF-8 text used for control batches");
  cmd->add_option("--batch-size", o.task.task_batch_size, "task batch size");
  cmd->add_option("--n-ctrl", o.task.n_ctrl, "control windows per batch");
  cmd->add_option("--ctrl-len", o.task.ctrl_len, "tokens per control window");
  cmd->add_option("--max-steps", o.env.max_steps, "episode length");
  cmd->add_option("--workers", o.workers, "threads for reward queries");
}

struct Stack {
  std::shared_ptr<const Model> model;
  std::shared_ptr<const Tokenizer> tokenizer;
  std::shared_ptr<const Corpus> corpus;
  std::shared_ptr<const TaskSuite> suite;
  std::shared_ptr<const InterventionScorer> scorer;
};

std::string weights_path(const std::string& given) {
  if (!given.empty()) return given;
  if (const char* env = std::getenv("CIRCUITRL_GPT2_WEIGHTS")) return env;
  throw std::invalid_argument("no weight file given (use --weights, the run config key \"weights\", or CIRCUITRL_GPT2_WEIGHTS)");
}

Stack load_stack(const std::string& weights, bool infer, const fs::path& tokenizer_dir, const fs::path& pools_dir,
                 const fs::path& corpus, TaskConfig task) {
  Stack s;
  const std::string wp = weights_path(weights);
  s.model = std::make_shared<const Model>(infer ? load_model_inferred(wp) : load_model(wp));
  s.tokenizer = std::make_shared<const Tokenizer>(
      Tokenizer::from_files(tokenizer_dir / "vocab.json", tokenizer_dir / "merges.txt"));
  if (static_cast<std::size_t>(s.model->config().vocab_size) != s.tokenizer->vocab_size()) {
    throw std::invalid_argument("model vocabulary does not match the tokenizer");
  }
  task.pools = WordPools::load(pools_dir);
  task.vocab_size = s.model->config().vocab_size;
  task.validate(s.tokenizer.get());
  s.corpus = std::make_shared<const Corpus>(Corpus::from_text_file(corpus, *s.tokenizer));
  s.suite = std::make_shared<const TaskSuite>(task, s.tokenizer, s.corpus);
  s.scorer = std::make_shared<const ModelScorer>(s.model);
  return s;
}

Stack load_stack(const StackOptions& o) {
  return load_stack(o.weights, o.infer_architecture, o.tokenizer_dir, o.pools_dir, o.corpus, o.task);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw FormatError("cannot write " + path);
  return out;
}

// A fixed task batch plus corpus control batches, for `ablate`.
class FixedBatchSource : public BatchSource {
 public:
  FixedBatchSource(TaskBatch batch, std::shared_ptr<const TaskSuite> suite)
      : batch_(std::move(batch)), suite_(std::move(suite)) {}
  TaskBatch task_batch(TaskId, std::uint64_t) const override { return batch_; }
  ControlBatch control_batch(std::uint64_t seed) const override { return suite_->control_batch(seed); }

 private:
  TaskBatch batch_;
  std::shared_ptr<const TaskSuite> suite_;
};

TaskBatch read_prompt_file(const fs::path& path, const Tokenizer& tok) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open prompt file " + path.string());
  std::vector<std::vector<std::int32_t>> rows;
  TaskBatch b;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line);
    std::vector<std::int32_t> ids{Tokenizer::kEndOfText};
    const auto body = tok.encode(j.at("prompt").get<std::string>());
    ids.insert(ids.end(), body.begin(), body.end());
    auto single = [&](const char* key) {
      const std::string word = j.at(key).get<std::string>();
      const auto id = tok.single_token_id(word);
      if (!id) throw FormatError(std::string(key) + " '" + word + "' is not a single token");
      return *id;
    };
    b.metric.positions.push_back(ids.size() - 1);
    b.metric.correct.push_back(single("correct"));
    b.metric.distractor.push_back(single("distractor"));
    rows.push_back(std::move(ids));
  }
  if (rows.empty()) throw FormatError("prompt file " + path.string() + " has no prompts");
  std::size_t seq = 0;
  for (const auto& r : rows) seq = std::max(seq, r.size());
  b.tokens.batch = rows.size();
  b.tokens.seq = seq;
  b.tokens.ids.assign(rows.size() * seq, Tokenizer::kEndOfText);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), b.tokens.ids.begin() + i * seq);
  return b;
}

int run_train(const std::string& config_path) {
  const RunConfig rc = load_run_config(config_path);
  Stack s = load_stack(rc.weights.string(), rc.infer_architecture, rc.tokenizer_dir, rc.pools_dir, rc.corpus, rc.task);
  TrainerOptions opts = rc.trainer;
  if (opts.progress_every == 0) opts.progress_every = 10;
  std::optional<Checkpoint> resume;
  if (!rc.resume.empty()) resume = load_checkpoint(rc.resume);
  const TrainResult r = train(s.scorer, s.suite, opts, resume ? &*resume : nullptr);
  std::cout << "trained " << r.history.size() << " updates, " << r.env_steps << " environment steps\n";
  if (!opts.output_dir.empty()) std::cout << "outputs in " << opts.output_dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-head ablation search over GPT-2 attention heads"};
  app.require_subcommand(1);

  std::string train_config;
  auto* train_cmd = app.add_subcommand("train", "train the PPO agent from a JSON run config");
  train_cmd->add_option("config", train_config, "run config (JSON)")->required()->check(CLI::ExistingFile);

  StackOptions eval_stack;
  std::string checkpoint, task_name_arg = "induction", regime, mode = "sample", eval_out;
  int k = 1, episodes = 20;
  std::uint64_t seed_floor = 10'000'000, sampler_seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "run evaluation episodes and append JSONL records");
  add_stack_options(eval_cmd, eval_stack);
  eval_cmd->add_option("--checkpoint", checkpoint, "policy checkpoint (not needed with --mode random)");
  eval_cmd->add_option("--task", task_name_arg, "induction, ioi or docstring");
  eval_cmd->add_option("--regime", regime, "task signal override: [0,0], [1,0] or [0,1]");
  eval_cmd->add_option("--k", k, "best-of-K candidates per step");
  eval_cmd->add_option("--episodes", episodes, "number of episodes");
  eval_cmd->add_option("--seed-floor", seed_floor, "first episode seed");
  eval_cmd->add_option("--sampler-seed", sampler_seed, "seed for action sampling");
  eval_cmd->add_option("--mode", mode, "sample, greedy or random")->check(CLI::IsMember({"sample", "greedy", "random"}));
  eval_cmd->add_flag_callback("--greedy", [&] { mode = "greedy"; }, "shorthand for --mode greedy");
  eval_cmd->add_option("--out", eval_out, "JSONL output (appended)")->required();

  StackOptions oracle_stack;
  std::string oracle_task = "induction", oracle_out;
  int oracle_episodes = 10;
  std::uint64_t oracle_floor = 10'000'000;
  auto* oracle_cmd = app.add_subcommand("oracle", "exhaustive single-head sweep per episode");
  add_stack_options(oracle_cmd, oracle_stack);
  oracle_cmd->add_option("--task", oracle_task, "induction, ioi or docstring");
  oracle_cmd->add_option("--episodes", oracle_episodes, "number of episodes");
  oracle_cmd->add_option("--seed-floor", oracle_floor, "first episode seed");
  oracle_cmd->add_option("--out", oracle_out, "JSONL output (appended)")->required();

  std::vector<std::string> report_logs;
  std::string report_dir = "reports", canonical = CanonicalSets::bundled_path().string();
  auto* report_cmd = app.add_subcommand("report", "build CSV tables from eval/oracle logs");
  report_cmd->add_option("logs", report_logs, "JSONL logs")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out-dir", report_dir, "directory for the CSV tables");
  report_cmd->add_option("--canonical", canonical, "canonical head sets (JSON)");

  StackOptions ablate_stack;
  std::string prompts, ablate_out;
  std::uint64_t control_seed = 0;
  auto* ablate_cmd = app.add_subcommand("ablate", "ablate every head on a prompt file and write a CSV");
  add_stack_options(ablate_cmd, ablate_stack);
  ablate_cmd->add_option("--prompts", prompts, "JSONL lines {\"prompt\", \"correct\", \"distractor\"}")
      ->required()
      ->check(CLI::ExistingFile);
  ablate_cmd->add_option("--control-seed", control_seed, "seed of the control batch");
  ablate_cmd->add_option("--out", ablate_out, "CSV output")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(train_config);

    if (*eval_cmd) {
      Stack s = load_stack(eval_stack);
      AblationEnv env(s.scorer, s.suite, eval_stack.env);
      EvalConfig cfg;
      cfg.task = parse_task(task_name_arg);
      if (!regime.empty()) cfg.onehot = parse_regime(regime);
      cfg.k = k;
      cfg.n_episodes = episodes;
      cfg.seed_floor = seed_floor;
      cfg.sampler_seed = sampler_seed;
      cfg.mode = parse_eval_mode(mode);
      cfg.workers = eval_stack.workers;
      std::optional<Checkpoint> ckpt;
      if (cfg.mode != EvalMode::Random) {
        if (checkpoint.empty()) throw std::invalid_argument("--checkpoint is required unless --mode random");
        ckpt = load_checkpoint(checkpoint);
      }
      const auto logs = run_eval(ckpt ? &ckpt->params : nullptr, env, cfg);
      auto out = open_out(eval_out);
      for (const auto& l : logs) out << episode_to_json(l) << '\n';
      const EvalSummary sum = summarize(logs);
      std::cout << "episodes " << sum.episodes << " mean running max " << sum.mean_running_max << " (se "
                << sum.std_error << ")\n";
      return 0;
    }

    if (*oracle_cmd) {
      Stack s = load_stack(oracle_stack);
      AblationEnv env(s.scorer, s.suite, oracle_stack.env);
      const TaskId task = parse_task(oracle_task);
      auto out = open_out(oracle_out);
      std::vector<OracleResult> results;
      for (int e = 0; e < oracle_episodes; ++e) {
        results.push_back(oracle_episode(env, oracle_floor + static_cast<std::uint64_t>(e), task, oracle_stack.workers));
        out << oracle_to_json(results.back()) << '\n';
        out.flush();
      }
      if (!results.empty()) {
        const OracleRanking rank = oracle_mean_ranking(results);
        std::cout << "oracle ceiling " << rank.ceiling << "; top heads:";
        for (std::size_t i = 0; i < std::min<std::size_t>(5, rank.order.size()); ++i) {
          std::cout << ' ' << env.head(rank.order[i]).label();
        }
        std::cout << '\n';
      }
      return 0;
    }

    if (*report_cmd) {
      std::vector<fs::path> paths(report_logs.begin(), report_logs.end());
      const LogBundle logs = read_logs(paths);
      const auto written = write_reports(logs, CanonicalSets::load(canonical), report_dir);
      for (const auto& p : written) std::cout << p.string() << '\n';
      if (written.empty()) std::cerr << "no tables could be built from the given logs\n";
      return 0;
    }

    if (*ablate_cmd) {
      Stack s = load_stack(ablate_stack);
      TaskBatch batch = read_prompt_file(prompts, *s.tokenizer);
      auto source = std::make_shared<const FixedBatchSource>(std::move(batch), s.suite);
      AblationEnv env(s.scorer, source, ablate_stack.env);
      env.reset(control_seed, TaskId::Induction);
      std::vector<int> all(static_cast<std::size_t>(env.n_actions()));
      for (std::size_t a = 0; a < all.size(); ++a) all[a] = static_cast<int>(a);
      const auto rewards = env.evaluate_many(all, ablate_stack.workers);
      std::ofstream out(ablate_out);
      if (!out) throw FormatError("cannot write " + ablate_out);
      out << std::setprecision(10) << "action,layer,head,task_damage,general_damage,reward\n";
      for (const auto& r : rewards) {
        out << r.action.action() << ',' << r.action.layer() << ',' << r.action.head() << ',' << r.task_damage << ','
            << r.general_damage << ',' << r.reward << '\n';
      }
      std::cout << "baseline metric " << env.state().baseline_metric << ", baseline control loss "
                << env.state().baseline_ctrl << '\n';
      return 0;
    }
  } catch (const ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
