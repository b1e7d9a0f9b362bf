#include "circuitrl/ppo/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "circuitrl/common.hpp"
#include "circuitrl/env/trace_log.hpp"
#include "circuitrl/ppo/rollout.hpp"

namespace circuitrl {

namespace {

constexpr std::uint64_t kPolicyInitTag = 0x706f6c69ULL;
constexpr std::uint64_t kSamplerTag = 0x73616d70ULL;

std::string join(const std::vector<std::uint64_t>& xs) {
  std::ostringstream s;
  for (std::size_t i = 0; i < xs.size(); ++i) s << (i ? "," : "") << xs[i];
  return s.str();
}

std::vector<std::uint64_t> split(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) out.push_back(std::stoull(item));
  return out;
}

const std::string& meta(const Checkpoint& c, const std::string& key) {
  const auto it = c.metadata.find(key);
  if (it == c.metadata.end()) throw FormatError("checkpoint metadata lacks " + key + "; not a training checkpoint");
  return it->second;
}

double mean_or_nan(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace

TrainResult train(std::shared_ptr<const InterventionScorer> scorer, std::shared_ptr<const BatchSource> batches,
                  const TrainerOptions& opts, const Checkpoint* resume) {
  const PPOHyperparams& hp = opts.ppo;
  hp.validate();
  std::ostream& log = opts.log ? *opts.log : std::cerr;
  if (hp.n_envs < 4) {
    log << "warning: training with " << hp.n_envs
        << " environments; runs with fewer than 4 parallel environments tend to collapse to a near-deterministic "
           "policy\n";
  }

  std::vector<AblationEnv> envs;
  for (int i = 0; i < hp.n_envs; ++i) envs.emplace_back(scorer, batches, opts.env);
  VectorEnv vec(std::move(envs), opts.seed, opts.workers);
  std::unique_ptr<TraceWriter> trace;
  if (!opts.trace_path.empty()) {
    trace = std::make_unique<TraceWriter>(opts.trace_path);
    for (std::size_t i = 0; i < vec.size(); ++i) vec.env(i).set_trace(trace.get());
  }
  RolloutCollector collector(vec);

  const PolicyShape shape = PolicyShape::for_actions(scorer->n_actions());
  Checkpoint state{init_params(mix_seed(opts.seed, kPolicyInitTag), shape), AdamState::zeros(shape), {}};
  std::mt19937_64 rng(mix_seed(opts.seed, kSamplerTag));
  std::int64_t first_update = 0;
  std::int64_t env_steps = 0;

  if (resume) {
    if (!(resume->params.shape() == shape)) throw FormatError("checkpoint policy shape does not match the environment");
    state.params = resume->params;
    state.adam = resume->adam;
    first_update = std::stoll(meta(*resume, "update"));
    env_steps = std::stoll(meta(*resume, "env_steps"));
    std::istringstream(meta(*resume, "rng_state")) >> rng;
    const auto counters = split(meta(*resume, "stream_counters"));
    const auto seeds = split(meta(*resume, "episode_seeds"));
    if (counters.size() != vec.size() || seeds.size() != vec.size()) {
      throw FormatError("checkpoint was written with a different number of environments");
    }
    for (std::size_t i = 0; i < vec.size(); ++i) vec.stream(i).set_counter(counters[i]);
    // Episodes in flight at the checkpoint restart from their seeds.
    if (hp.horizon % opts.env.max_steps != 0) {
      log << "warning: horizon " << hp.horizon << " is not a multiple of max_steps " << opts.env.max_steps
          << "; resumed episodes restart from step 0, so the run will not match an uninterrupted one exactly\n";
    }
    collector.reset(seeds);
  } else {
    collector.reset();
  }

  const std::int64_t n_updates = hp.n_updates();
  const LinearSchedule schedule = hp.schedule();

  std::ofstream metrics;
  if (!opts.output_dir.empty()) {
    std::filesystem::create_directories(opts.output_dir);
    const auto path = opts.output_dir / "metrics.csv";
    const bool fresh = !resume || !std::filesystem::exists(path);
    metrics.open(path, fresh ? std::ios::trunc : std::ios::app);
    if (!metrics) throw FormatError("cannot write " + path.string());
    if (fresh) metrics << kMetricsHeader << '\n';
    metrics << std::setprecision(10);
  }

  auto snapshot = [&](std::int64_t updates_done) {
    state.metadata.clear();
    state.metadata["update"] = std::to_string(updates_done);
    state.metadata["env_steps"] = std::to_string(env_steps);
    std::ostringstream rs;
    rs << rng;
    state.metadata["rng_state"] = rs.str();
    std::vector<std::uint64_t> counters;
    for (std::size_t i = 0; i < vec.size(); ++i) counters.push_back(vec.stream(i).counter());
    state.metadata["stream_counters"] = join(counters);
    state.metadata["episode_seeds"] = join(collector.current_seeds());
    state.metadata["run_seed"] = std::to_string(opts.seed);
  };

  TrainResult result;
  for (std::int64_t u = first_update; u < n_updates; ++u) {
    const double lr = schedule.rate(u);
    RolloutBuffer buf = collector.collect(state.params, rng, hp.horizon);
    env_steps += static_cast<std::int64_t>(buf.size());
    compute_advantages(buf, hp.gamma, hp.gae_lambda);
    const UpdateStats stats = ppo_update(state.params, state.adam, buf, hp, lr, rng);

    std::vector<double> ind, ioi;
    for (const auto& ep : buf.finished) {
      if (ep.task == TaskId::Induction) ind.push_back(ep.running_max);
      if (ep.task == TaskId::IOI) ioi.push_back(ep.running_max);
    }
    UpdateRecord rec{u + 1, env_steps, lr, stats, mean_or_nan(ind), mean_or_nan(ioi)};
    result.history.push_back(rec);

    if (metrics.is_open()) {
      metrics << rec.update << ',' << rec.env_steps << ',' << rec.lr << ',' << stats.policy_loss << ','
              << stats.value_loss << ',' << stats.entropy << ',' << stats.clip_frac << ',' << stats.approx_kl << ','
              << rec.mean_runmax_induction << ',' << rec.mean_runmax_ioi << '\n';
      metrics.flush();
    }
    if (opts.progress_every > 0 && (u + 1) % opts.progress_every == 0) {
      log << "update " << rec.update << "/" << n_updates << " lr " << lr << " entropy " << stats.entropy
          << " runmax induction " << rec.mean_runmax_induction << " ioi " << rec.mean_runmax_ioi << '\n';
    }
    const bool last = u + 1 == n_updates;
    if (!opts.output_dir.empty() && (last || (opts.checkpoint_every > 0 && (u + 1) % opts.checkpoint_every == 0))) {
      snapshot(u + 1);
      std::ostringstream name;
      name << "checkpoint_" << std::setw(5) << std::setfill('0') << (u + 1) << ".safetensors";
      save_checkpoint(opts.output_dir / name.str(), state);
      if (last) save_checkpoint(opts.output_dir / "final.safetensors", state);
    }
  }
  snapshot(n_updates);
  result.final_state = state;
  result.env_steps = env_steps;
  return result;
}

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw FormatError("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open run config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("run config " + path.string() + ": " + e.what());
  }
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    if (p.empty()) return {};
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  RunConfig rc;
  const std::filesystem::path data(CIRCUITRL_DATA_DIR);
  rc.tokenizer_dir = data / "tokenizer";
  rc.pools_dir = data / "pools";
  rc.corpus = data / "corpus" / "moby_dick_excerpt.txt";
  try {
    reject_unknown(j,
                   {"seed", "workers", "output_dir", "checkpoint_every", "progress_every", "trace", "weights",
                    "infer_architecture", "tokenizer_dir", "pools_dir", "corpus", "resume", "ppo", "env", "task"},
                   "run config");
    TrainerOptions& t = rc.trainer;
    take(j, "seed", t.seed);
    take(j, "workers", t.workers);
    take(j, "checkpoint_every", t.checkpoint_every);
    take(j, "progress_every", t.progress_every);
    take(j, "infer_architecture", rc.infer_architecture);
    if (j.contains("output_dir")) t.output_dir = resolve(j["output_dir"].get<std::string>());
    if (j.contains("trace")) t.trace_path = resolve(j["trace"].get<std::string>());
    if (j.contains("weights")) rc.weights = resolve(j["weights"].get<std::string>());
    if (j.contains("tokenizer_dir")) rc.tokenizer_dir = resolve(j["tokenizer_dir"].get<std::string>());
    if (j.contains("pools_dir")) rc.pools_dir = resolve(j["pools_dir"].get<std::string>());
    if (j.contains("corpus")) rc.corpus = resolve(j["corpus"].get<std::string>());
    if (j.contains("resume")) rc.resume = resolve(j["resume"].get<std::string>());

    if (j.contains("ppo")) {
      const json& p = j["ppo"];
      reject_unknown(p,
                     {"gamma", "gae_lambda", "clip", "ent_coef", "vf_coef", "epochs", "minibatches", "n_envs",
                      "horizon", "total_steps", "learning_rate", "final_lr_fraction", "max_grad_norm",
                      "normalize_advantages"},
                     "ppo");
      PPOHyperparams& h = t.ppo;
      take(p, "gamma", h.gamma);
      take(p, "gae_lambda", h.gae_lambda);
      take(p, "clip", h.clip);
      take(p, "ent_coef", h.ent_coef);
      take(p, "vf_coef", h.vf_coef);
      take(p, "epochs", h.epochs);
      take(p, "minibatches", h.minibatches);
      take(p, "n_envs", h.n_envs);
      take(p, "horizon", h.horizon);
      take(p, "total_steps", h.total_steps);
      take(p, "learning_rate", h.learning_rate);
      take(p, "final_lr_fraction", h.final_lr_fraction);
      take(p, "max_grad_norm", h.max_grad_norm);
      take(p, "normalize_advantages", h.normalize_advantages);
    }
    if (j.contains("env")) {
      const json& e = j["env"];
      reject_unknown(e, {"max_steps", "reward_scale", "eval_seed_floor", "training_tasks"}, "env");
      take(e, "max_steps", t.env.max_steps);
      take(e, "reward_scale", t.env.reward_scale);
      take(e, "eval_seed_floor", t.env.eval_seed_floor);
      if (e.contains("training_tasks")) {
        t.env.training_tasks.clear();
        for (const auto& name : e["training_tasks"]) t.env.training_tasks.push_back(parse_task(name.get<std::string>()));
      }
    }
    if (j.contains("task")) {
      const json& k = j["task"];
      reject_unknown(k, {"task_batch_size", "induction_filler_len", "n_ctrl", "ctrl_len"}, "task");
      take(k, "task_batch_size", rc.task.task_batch_size);
      take(k, "induction_filler_len", rc.task.induction_filler_len);
      take(k, "n_ctrl", rc.task.n_ctrl);
      take(k, "ctrl_len", rc.task.ctrl_len);
    }
  } catch (const json::exception& e) {
    throw FormatError("run config " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError("run config " + path.string() + ": " + e.what());
  }
  return rc;
}

}  // namespace circuitrl
