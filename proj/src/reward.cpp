#include "gql/reward.hpp"

#include <cmath>

namespace gql {

double score_reward(double scr_pred, double scr_gt, double epsilon) {
  if (!std::isfinite(scr_pred) || !std::isfinite(scr_gt)) return 0.0;
  if (epsilon == 0.0) return scr_pred == scr_gt ? 1.0 : 0.0;
  return std::fabs(scr_pred - scr_gt) < epsilon ? 1.0 : 0.0;
}

double degradation_reward(DegradationClass deg_pred, DegradationClass deg_gt) {
  return deg_pred == deg_gt ? 1.0 : 0.0;
}

double level_reward(DegradationClass deg_pred, SeverityLevel lev_pred,
                    DegradationClass deg_gt, SeverityLevel lev_gt) {
  return (deg_pred == deg_gt && lev_pred == lev_gt) ? 1.0 : 0.0;
}

double comparison_reward(Choice res_pred, Choice res_comp) {
  return res_pred == res_comp ? 1.0 : 0.0;
}

double total_reward(const RewardBreakdown& c, TaskKind task, const RewardConfig& cfg) {
  switch (task) {
    case TaskKind::kScore: return c.r_fmt + c.r_scr;
    case TaskKind::kDegradation: return c.r_fmt + cfg.alpha1 * c.r_deg + cfg.alpha2 * c.r_lev;
    case TaskKind::kComparison: return c.r_fmt + c.r_comp;
  }
  return 0.0;
}

RewardBreakdown evaluate_response(std::string_view text, const GroundTruth& truth,
                                  TaskKind task, const RewardConfig& cfg) {
  RewardBreakdown out;
  const ParsedResponse parsed = parse_response(text);
  out.r_fmt = format_reward(parsed);

  const auto answer = parse_answer_payload(parsed.answer_body, task);
  if (answer) {
    switch (task) {
      case TaskKind::kScore: {
        const auto& gt = std::get<MosTruth>(truth);
        out.r_scr = score_reward(std::get<RatingAnswer>(*answer).value, gt.mos,
                                 cfg.score_threshold);
        break;
      }
      case TaskKind::kDegradation: {
        const auto& gt = std::get<DegTruth>(truth);
        const auto& pred = std::get<DegradationAnswer>(*answer);
        out.r_deg = degradation_reward(pred.cls, gt.cls);
        out.r_lev = level_reward(pred.cls, pred.sev, gt.cls, gt.sev);
        break;
      }
      case TaskKind::kComparison: {
        const auto& gt = std::get<CompTruth>(truth);
        out.r_comp = comparison_reward(std::get<ComparisonAnswer>(*answer).choice, gt.better);
        break;
      }
    }
  }
  out.total = total_reward(out, task, cfg);
  return out;
}

std::vector<RewardBreakdown> evaluate_group(std::span<const std::string> responses,
                                            const GroundTruth& truth, TaskKind task,
                                            const RewardConfig& cfg) {
  if (truth_task(truth) != task) throw ConfigError("ground truth does not match task");
  std::vector<RewardBreakdown> out;
  out.reserve(responses.size());
  for (const auto& r : responses) out.push_back(evaluate_response(r, truth, task, cfg));
  return out;
}

}  // namespace gql
