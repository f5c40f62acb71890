#ifndef GQL_GRPO_HPP_
#define GQL_GRPO_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gql/policy.hpp"
#include "gql/reward.hpp"
#include "gql/types.hpp"

namespace gql {

// One query's worth of sampled responses: the unit advantages are
// normalized over and the unit the optimizer consumes.
struct GroupRollout {
  std::string sample_id;
  TaskKind task = TaskKind::kScore;
  GroundTruth truth;
  std::vector<double> ctx;
  std::vector<std::vector<int>> responses;
  std::vector<double> old_log_probs;
  std::vector<RewardBreakdown> breakdowns;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

struct TrainConfig {
  int group_size = 8;        // N
  double kl_weight = 1e-3;   // beta
  double clip_range = 0.2;   // delta
  RewardConfig reward;       // epsilon, alpha1, alpha2
  double lr_start = 1e-3;
  double lr_end = 1e-6;
  int epochs = 10;
  int batch_size = 32;
  KlMode kl_mode = KlMode::kExact;
  std::uint64_t seed = 1;
  // Optimizer steps taken on each sampled batch before refreshing the old
  // policy; 1 keeps every ratio at exactly 1.
  int inner_steps = 1;

  void validate() const;
};

// Group-normalized advantages: (r - mean) / population std, all zeros when
// the population std falls below 1e-8. Rewards are anchored at the first
// element before normalization so constant shifts cancel exactly in
// floating point, not just in expectation.
std::vector<double> normalize_advantages(std::span<const double> rewards);

// exp(logp_new - logp_old), exponent clamped to +/-50.
double prob_ratio(double logp_new, double logp_old);

inline bool ratio_clamped(double logp_new, double logp_old) {
  const double d = logp_new - logp_old;
  return d > 50.0 || d < -50.0;
}

// min(rho*adv, clip(rho, 1-delta, 1+delta)*adv)
double clipped_surrogate(double rho, double adv, double delta);

// d(clipped surrogate)/d(logp_new): rho*adv when the unclipped branch is
// selected, exactly 0 when the clipped constant wins.
double surrogate_logp_coeff(double rho, double adv, double delta);

// Linear decay from lr_start at step 0 to lr_end at total_steps.
double lr_schedule(long step, long total_steps, double lr_start, double lr_end);

// Mean over the group of clipped surrogate minus beta * KL; the scalar
// gradient ascent maximizes.
double grpo_objective(const GroupRollout& group, const PolicyParams& params_new,
                      const PolicyParams& params_ref, const TrainConfig& cfg);

// grad += d(grpo_objective)/d(params_new). Returns the objective value and
// writes the group's mean KL penalty to *mean_kl if non-null; *ratio_clamps
// counts responses whose log-ratio hit the +/-50 guard (an anomaly worth
// surfacing, never an abort).
double group_gradient(const GroupRollout& group, const PolicyParams& params_new,
                      const PolicyParams& params_ref, const TrainConfig& cfg,
                      std::span<double> grad, double* mean_kl, long* ratio_clamps = nullptr);

// Decoupled-weight-decay adaptive-moment state (0.9 / 0.999 / 1e-8, decay
// 0.01) matching the parameter layout.
struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  long step = 0;
  std::vector<double> m;
  std::vector<double> v;

  explicit OptimizerState(const PolicyDims& dims)
      : m(ParamLayout(dims).total, 0.0), v(ParamLayout(dims).total, 0.0) {}
};

enum class ExecMode { kSerial, kParallel };

// Reusable buffers for grpo_step; resized on first use.
struct StepWorkspace {
  std::vector<double> group_grads;  // batch x param_count
  std::vector<double> grad;
  std::vector<double> group_objective;
  std::vector<double> group_kl;
  std::vector<long> group_clamps;
};

struct StepOutcome {
  double objective = 0.0;
  double mean_kl = 0.0;
  long ratio_clamps = 0;
};

// One gradient ascent update on the batch-mean objective. The parallel mode
// computes per-group gradients concurrently and reduces them in group-index
// order, so both modes produce bit-identical parameters.
StepOutcome grpo_step(PolicyParams& params, OptimizerState& opt,
                      std::span<const GroupRollout> groups, const PolicyParams& params_ref,
                      const TrainConfig& cfg, long step_index, long total_steps,
                      ExecMode mode = ExecMode::kSerial, StepWorkspace* ws = nullptr);

}  // namespace gql

#endif  // GQL_GRPO_HPP_
