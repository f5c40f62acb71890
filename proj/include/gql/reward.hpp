#ifndef GQL_REWARD_HPP_
#define GQL_REWARD_HPP_

#include <span>
#include <string>
#include <vector>

#include "gql/response.hpp"
#include "gql/types.hpp"

namespace gql {

struct RewardConfig {
  double score_threshold = 0.35;  // epsilon
  double alpha1 = 0.25;           // weight on the class reward
  double alpha2 = 0.75;           // weight on the class-and-level reward

  void validate() const {
    if (!(score_threshold >= 0.0)) throw ConfigError("score_threshold must be >= 0");
  }
};

// Per-response reward components; inactive tasks stay zero. total is the
// task-dependent combination:
//   score:       r_fmt + r_scr
//   degradation: r_fmt + alpha1*r_deg + alpha2*r_lev
//   comparison:  r_fmt + r_comp
struct RewardBreakdown {
  double r_fmt = 0.0;
  double r_scr = 0.0;
  double r_deg = 0.0;
  double r_lev = 0.0;
  double r_comp = 0.0;
  double total = 0.0;
};

// 1 iff |pred - gt| < epsilon (strict); epsilon == 0 degenerates to exact
// equality. Non-finite inputs score 0 rather than aborting.
double score_reward(double scr_pred, double scr_gt, double epsilon);

double degradation_reward(DegradationClass deg_pred, DegradationClass deg_gt);

// 1 only when class and level both match; pointwise <= degradation_reward.
double level_reward(DegradationClass deg_pred, SeverityLevel lev_pred,
                    DegradationClass deg_gt, SeverityLevel lev_gt);

double comparison_reward(Choice res_pred, Choice res_comp);

// Combines already-populated components for the given task.
double total_reward(const RewardBreakdown& components, TaskKind task, const RewardConfig& cfg);

// Full pipeline for one response text: parse, format reward, payload parse
// (failure zeroes all task rewards), task rewards, total.
RewardBreakdown evaluate_response(std::string_view text, const GroundTruth& truth,
                                  TaskKind task, const RewardConfig& cfg);

// Element i depends only on responses[i]; order-preserving.
std::vector<RewardBreakdown> evaluate_group(std::span<const std::string> responses,
                                            const GroundTruth& truth, TaskKind task,
                                            const RewardConfig& cfg);

}  // namespace gql

#endif  // GQL_REWARD_HPP_
