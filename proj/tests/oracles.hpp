// Independent straight-line oracles the implementation is checked against.
// Everything here is deliberately naive and recomputes from scratch.

#ifndef GQL_TESTS_ORACLES_HPP_
#define GQL_TESTS_ORACLES_HPP_

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gql/grpo.hpp"
#include "gql/policy.hpp"
#include "gql/reward.hpp"
#include "gql/types.hpp"

namespace gql::oracle {

// What a response claims, reduced to its semantic content.
struct PredSummary {
  bool format_ok = false;       // tag and brace rules both hold
  bool payload_ok = false;      // task keys parsed into the closed vocabulary
  double rating = 0.0;          // score task
  DegradationClass cls = DegradationClass::kNull;
  SeverityLevel sev = SeverityLevel::kNone;
  Choice choice = Choice::kSimilar;
};

// Straight-line restatement of the reward rules: format + task indicator
// combination with weights alpha1/alpha2 (and the comparison variant).
RewardBreakdown score_prediction(const PredSummary& pred, const GroundTruth& truth,
                                 TaskKind task, const RewardConfig& cfg);

// Textbook two-pass Pearson correlation.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Spearman via explicit sort-based average ranks, then pearson.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

// Central finite differences of an arbitrary scalar function of the policy
// parameters. Mutates a copy; step h applies to one coordinate at a time.
std::vector<double> finite_difference_grad(const PolicyParams& params,
                                           const std::function<double(const PolicyParams&)>& f,
                                           double h);

// Per-position categorical KL by direct enumeration with naive softmax.
double kl_exact_brute(const PolicyParams& pnew, const PolicyParams& pref,
                      std::span<const double> ctx, std::span<const int> tokens);

// max over components of |a-b| / max(floor, |a|, |b|)
double max_rel_err(std::span<const double> a, std::span<const double> b, double floor = 1e-6);

// Mean probability that a uniform rating on [1,5] lands within epsilon of
// the ground truth; the chance baseline for score-reward hit rates.
double uniform_rating_hit_rate(std::span<const double> gts, double epsilon);

}  // namespace gql::oracle

#endif  // GQL_TESTS_ORACLES_HPP_
