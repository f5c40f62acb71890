#ifndef GQL_TRAINER_HPP_
#define GQL_TRAINER_HPP_

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gql/env.hpp"
#include "gql/grpo.hpp"
#include "gql/metrics.hpp"
#include "gql/policy.hpp"

namespace gql {

struct TaskMix {
  double score = 0.5;
  double degradation = 0.5;
  double comparison = 0.0;
};

struct RunConfig {
  TrainConfig train;
  EnvConfig env;
  int hidden_dim = 32;
  int embed_dim = 16;
  int max_len = 16;
  double init_scale = 0.1;
  TaskMix task_mix;
  // Optimizer steps per epoch; 0 derives it from the dataset size when
  // training from files.
  int steps_per_epoch = 32;
  std::filesystem::path log_dir;
  std::filesystem::path dataset;  // optional: train from generated files
  int eval_every = 0;
  int eval_samples = 256;
  int checkpoint_every = 500;
  int threads = 1;
  // "init" anchors the KL penalty to the starting policy; "format" anchors
  // it to the constructed grammar-demonstrating reference.
  std::string ref_mode = "init";
  // Resume from this checkpoint instead of a fresh initialization; the
  // optimizer state starts over.
  std::filesystem::path init_checkpoint;
  bool debug_dump_rollouts = false;

  PolicyDims policy_dims() const;
  long total_steps() const { return static_cast<long>(train.epochs) * steps_per_epoch; }
  void validate() const;
};

// Strict parse: unknown keys are configuration errors. The GQL_SEED
// environment variable, when set, overrides the config seed.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json_text(const std::string& text);

struct StepStats {
  long step = 0;
  double lr = 0.0;
  double mean_total_reward = 0.0;
  double fmt_rate = 0.0;
  std::optional<double> scr_hit_rate;
  std::optional<double> deg_acc;
  std::optional<double> lev_acc;
  double mean_kl = 0.0;
  double objective = 0.0;
  double wall_ms = 0.0;  // console/diagnostics only, never logged to file
};

struct TrainResult {
  long steps_run = 0;
  bool stopped_early = false;
  std::filesystem::path log_path;
  std::filesystem::path final_checkpoint;
};

// Full training loop: per step, draw batch_size task-mixed contexts,
// snapshot the old policy, sample N responses per context, score them,
// normalize advantages within each group, and take one gradient ascent
// step. Writes a JSONL log (header line first), periodic checkpoints, and
// a final checkpoint. Identical config and seed reproduce identical bytes
// at any thread count.
TrainResult run_train(const RunConfig& cfg,
                      const std::function<bool(const StepStats&)>& stop_cb = {});

// Produces a response string for one sample; the trained policy is one
// implementation, test doubles are another.
using Decoder = std::function<std::string(const SyntheticSample&)>;

Decoder greedy_policy_decoder(const PolicyParams& params, const EnvConfig& env);

// Greedy evaluation: PLCC/SRCC and threshold hit rate on score samples,
// class/level accuracy on degradation samples, choice accuracy on
// comparison samples. Parse failures count as wrong and are tallied.
MetricReport evaluate_samples(std::span<const SyntheticSample> samples, const Decoder& decoder,
                              const RewardConfig& reward_cfg);

struct GradeSummary {
  int n_scored = 0;
  int n_errors = 0;
  std::vector<std::string> unmatched;
  double mean_total = 0.0;
  RewardBreakdown mean_components;
};

// Offline grading: joins a responses JSONL with a labels JSONL by id and
// writes one RewardBreakdown line per scored response plus a final
// aggregate line to `out`.
GradeSummary grade_rewards(const std::filesystem::path& responses_path,
                           const std::filesystem::path& labels_path, const RewardConfig& cfg,
                           std::ostream& out);

// Loads one dataset file, or the three files of a generated dataset
// directory.
std::vector<SyntheticSample> load_samples(const std::filesystem::path& path,
                                          int* malformed_lines = nullptr);

}  // namespace gql

#endif  // GQL_TRAINER_HPP_
