#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "circuitrl/model/toy.hpp"
#include "circuitrl/planner/evaluation.hpp"
#include "test_support.hpp"

using namespace circuitrl;
namespace fs = std::filesystem;

namespace {

// A 2x2-head model over the full GPT-2 vocabulary, so the bundled tokenizer,
// pools and corpus work unchanged while every forward pass stays cheap.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(circuitrl::testing::temp_dir("cli"));
    ModelConfig cfg = toy_config();
    cfg.vocab_size = 50257;
    cfg.max_positions = 256;
    const Model m(cfg, random_toy_weights(cfg, 11, 0.2f));
    write_safetensors(*dir_ / "wide.safetensors", m.to_safetensors());
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }

  static int run(const std::string& args) {
    const std::string cmd = std::string(CIRCUITRL_CLI_PATH) + " " + args + " > " + (*dir_ / "stdout.txt").string() +
                            " 2> " + (*dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  static std::string stack() {
    return "--weights " + (*dir_ / "wide.safetensors").string() +
           " --infer-architecture --batch-size 2 --n-ctrl 1 --ctrl-len 16 --max-steps 4";
  }
  static std::string read(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }
  static std::string err() { return read(*dir_ / "stderr.txt"); }

  static fs::path* dir_;
};

fs::path* CliTest::dir_ = nullptr;

}  // namespace

TEST_F(CliTest, OracleEvalReportRoundTrip) {
  const fs::path logs = *dir_ / "logs.jsonl";
  ASSERT_EQ(run("oracle " + stack() + " --task induction --episodes 2 --out " + logs.string()), 0) << err();
  ASSERT_EQ(run("eval " + stack() + " --task docstring --mode random --episodes 2 --out " + logs.string()), 0)
      << err();
  const LogBundle b = read_logs({logs});
  ASSERT_EQ(b.oracles.size(), 2u);
  EXPECT_EQ(b.oracles[0].seed, 10'000'000u);
  EXPECT_EQ(b.oracles[0].rewards.size(), 4u);
  ASSERT_EQ(b.episodes.size(), 2u);
  EXPECT_EQ(b.episodes[0].picks.size(), 4u);

  const fs::path out = *dir_ / "tables";
  ASSERT_EQ(run("report " + logs.string() + " --out-dir " + out.string()), 0) << err();
  EXPECT_TRUE(fs::exists(out / "table1_oracle.csv"));
  EXPECT_TRUE(fs::exists(out / "table4_transfer.csv"));
}

TEST_F(CliTest, AblateWritesOneRowPerHead) {
  const fs::path prompts = *dir_ / "prompts.jsonl";
  {
    std::ofstream p(prompts);
    p << R"({"prompt": "When Mary and John went to the store, John gave a drink to", "correct": " Mary", "distractor": " John"})"
      << '\n'
      << R"({"prompt": "When Tom and Anna went to the park, Anna gave a book to", "correct": " Tom", "distractor": " Anna"})"
      << '\n';
  }
  const fs::path csv = *dir_ / "ablate.csv";
  ASSERT_EQ(run("ablate " + stack() + " --prompts " + prompts.string() + " --out " + csv.string()), 0) << err();
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "action,layer,head,task_damage,general_damage,reward");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
}

TEST_F(CliTest, TrainThenEvaluateCheckpoint) {
  const fs::path cfg = *dir_ / "run.json";
  {
    nlohmann::json j = {
        {"seed", 4},
        {"output_dir", "run"},
        {"weights", "wide.safetensors"},
        {"infer_architecture", true},
        {"checkpoint_every", 0},
        {"ppo", {{"n_envs", 4}, {"horizon", 4}, {"minibatches", 2}, {"total_steps", 32}, {"epochs", 2}}},
        {"env", {{"max_steps", 4}}},
        {"task", {{"task_batch_size", 2}, {"n_ctrl", 1}, {"ctrl_len", 16}}},
    };
    std::ofstream(cfg) << j.dump(2);
  }
  ASSERT_EQ(run("train " + cfg.string()), 0) << err();
  const fs::path ckpt = *dir_ / "run" / "final.safetensors";
  ASSERT_TRUE(fs::exists(ckpt));
  const std::string metrics = read(*dir_ / "run" / "metrics.csv");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 3);

  const fs::path logs = *dir_ / "eval.jsonl";
  // Three steps keep at least two legal heads for K = 2.
  std::string short_stack = stack();
  short_stack.replace(short_stack.find("--max-steps 4"), 13, "--max-steps 3");
  ASSERT_EQ(run("eval " + short_stack + " --checkpoint " + ckpt.string() +
                " --task ioi --regime '[0,0]' --k 2 --episodes 1 --out " + logs.string()),
            0)
      << err();
  const LogBundle b = read_logs({logs});
  ASSERT_EQ(b.episodes.size(), 1u);
  EXPECT_EQ(b.episodes[0].k, 2);
  EXPECT_EQ(b.episodes[0].picks.size(), 3u);
  EXPECT_EQ(b.episodes[0].onehot, (std::array<double, 2>{0, 0}));

  // Four heads cannot supply five distinct candidates.
  EXPECT_EQ(run("eval " + stack() + " --checkpoint " + ckpt.string() + " --task ioi --k 5 --episodes 1 --out " +
                logs.string()),
            3);
  EXPECT_NE(err().find("contract violation"), std::string::npos);
}

TEST_F(CliTest, ErrorsExitNonZero) {
  EXPECT_NE(run(""), 0);
  EXPECT_EQ(run("eval " + stack() + " --task induction --out " + (*dir_ / "x.jsonl").string()), 2);
  EXPECT_NE(err().find("--checkpoint"), std::string::npos);
  EXPECT_EQ(run("oracle --weights " + (*dir_ / "missing.safetensors").string() + " --task ioi --out " +
                (*dir_ / "x.jsonl").string()),
            2);
}
