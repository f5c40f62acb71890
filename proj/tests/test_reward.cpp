#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gql/reward.hpp"
#include "gql/rng.hpp"
#include "oracles.hpp"

using namespace gql;

TEST_CASE("score reward threshold semantics") {
  CHECK(score_reward(3.20, 3.00, 0.35) == 1.0);
  CHECK(score_reward(3.40, 3.00, 0.35) == 0.0);  // strict inequality
  CHECK(score_reward(2.75, 2.75, 0.0) == 1.0);   // epsilon 0 = exact match
  CHECK(score_reward(2.7500001, 2.75, 0.0) == 0.0);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK(score_reward(nan, 3.0, 0.35) == 0.0);
  CHECK(score_reward(3.0, std::numeric_limits<double>::infinity(), 0.35) == 0.0);
}

TEST_CASE("score reward monotone in epsilon") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double pred = rng.uniform(1.0, 5.0), gt = rng.uniform(1.0, 5.0);
    double prev = 0.0;
    for (double eps : {0.0, 0.1, 0.3, 0.7, 1.5, 4.0}) {
      const double r = score_reward(pred, gt, eps);
      CHECK(r >= prev);
      prev = r;
    }
  }
}

TEST_CASE("degradation and level rewards") {
  CHECK(degradation_reward(DegradationClass::kNoise, DegradationClass::kNoise) == 1.0);
  CHECK(degradation_reward(DegradationClass::kBlur, DegradationClass::kNoise) == 0.0);
  CHECK(degradation_reward(DegradationClass::kNull, DegradationClass::kNull) == 1.0);

  using enum SeverityLevel;
  CHECK(level_reward(DegradationClass::kNoise, kSerious, DegradationClass::kNoise, kSerious) == 1.0);
  CHECK(level_reward(DegradationClass::kNoise, kSerious, DegradationClass::kNoise, kObvious) == 0.0);
  CHECK(level_reward(DegradationClass::kBlur, kSerious, DegradationClass::kNoise, kSerious) == 0.0);
}

TEST_CASE("level reward never exceeds degradation reward") {
  for (int pc = 0; pc < kNumClasses; ++pc) {
    for (int ps = 0; ps < kNumSeverities; ++ps) {
      for (int gc = 0; gc < kNumClasses; ++gc) {
        for (int gs = 0; gs < kNumSeverities; ++gs) {
          const auto pcl = static_cast<DegradationClass>(pc);
          const auto psv = static_cast<SeverityLevel>(ps);
          const auto gcl = static_cast<DegradationClass>(gc);
          const auto gsv = static_cast<SeverityLevel>(gs);
          CHECK(level_reward(pcl, psv, gcl, gsv) <= degradation_reward(pcl, gcl));
        }
      }
    }
  }
}

TEST_CASE("comparison reward") {
  CHECK(comparison_reward(Choice::kA, Choice::kA) == 1.0);
  CHECK(comparison_reward(Choice::kB, Choice::kSimilar) == 0.0);
  CHECK(comparison_reward(Choice::kSimilar, Choice::kSimilar) == 1.0);
}

TEST_CASE("total reward combinations") {
  RewardConfig cfg;
  RewardBreakdown b;
  b.r_fmt = 1.0;
  b.r_scr = 1.0;
  CHECK(total_reward(b, TaskKind::kScore, cfg) == 2.0);

  b = {};
  b.r_fmt = 1.0;
  b.r_deg = 1.0;
  CHECK(total_reward(b, TaskKind::kDegradation, cfg) == 1.25);

  b = {};
  b.r_deg = 1.0;
  b.r_lev = 1.0;
  CHECK(total_reward(b, TaskKind::kDegradation, cfg) == 1.0);  // fmt failed, task rewards stand
}

TEST_CASE("evaluate_group composition") {
  RewardConfig cfg;
  const GroundTruth truth = MosTruth{3.0};
  std::vector<std::string> responses = {
      "<think>t</think><answer>{\"rating\": 3.1}</answer>",
      "garbage",
      "<think>t</think><answer>{\"rating\": 9.9}</answer>",
  };
  const auto out = evaluate_group(responses, truth, TaskKind::kScore, cfg);
  REQUIRE(out.size() == 3);
  CHECK(out[0].total == 2.0);
  CHECK(out[1].r_fmt == 0.0);
  CHECK(out[1].total == 0.0);
  CHECK(out[2].r_fmt == 1.0);
  CHECK(out[2].r_scr == 0.0);
  CHECK(out[2].total == 1.0);
}

TEST_CASE("parse failure zeroes every task component") {
  RewardConfig cfg;
  const std::vector<std::string> rs = {"<think>t</think><answer>{\"wrong\": 1}</answer>"};
  const auto s = evaluate_group(rs, GroundTruth(MosTruth{3.0}), TaskKind::kScore, cfg);
  CHECK(s[0].r_fmt == 1.0);
  CHECK(s[0].r_scr == 0.0);
  const auto d = evaluate_group(rs, GroundTruth(DegTruth{}), TaskKind::kDegradation, cfg);
  CHECK(d[0].r_deg == 0.0);
  CHECK(d[0].r_lev == 0.0);
  const auto c = evaluate_group(rs, GroundTruth(CompTruth{}), TaskKind::kComparison, cfg);
  CHECK(c[0].r_comp == 0.0);
}

TEST_CASE("totals stay in [0,2] when alpha1+alpha2=1") {
  RewardConfig cfg;
  Rng rng(11);
  const Vocabulary vocab = make_default_vocab();
  for (int i = 0; i < 500; ++i) {
    std::string text;
    const int len = static_cast<int>(rng.uniform01() * 16);
    for (int k = 0; k < len; ++k) {
      text += vocab.surface(static_cast<int>(rng.uniform01() * vocab.size()));
    }
    for (const GroundTruth truth :
         {GroundTruth(MosTruth{2.5}),
          GroundTruth(DegTruth{DegradationClass::kBlur, SeverityLevel::kSlight}),
          GroundTruth(CompTruth{Choice::kB})}) {
      const auto b = evaluate_response(text, truth, truth_task(truth), cfg);
      CHECK(b.total >= 0.0);
      CHECK(b.total <= 2.0);
    }
  }
}

// Mirror of the acceptance sweep at small scale: rendered predictions for
// every (class, severity) against every ground truth must match the
// straight-line scorer exactly.
TEST_CASE("oracle spot equivalence on the degradation grid") {
  RewardConfig cfg;
  std::vector<DegTruth> gts;
  gts.push_back({DegradationClass::kNull, SeverityLevel::kNone});
  for (int c = 0; c < kNumClasses - 1; ++c) {
    for (int s = 0; s < 5; ++s) {
      gts.push_back({static_cast<DegradationClass>(c), static_cast<SeverityLevel>(s)});
    }
  }
  for (const auto& gt : gts) {
    for (const auto& pred : gts) {
      const std::string text =
          render_response(ParsedAnswer(DegradationAnswer{pred.cls, pred.sev}), "t");
      const auto got = evaluate_response(text, GroundTruth(gt), TaskKind::kDegradation, cfg);
      oracle::PredSummary ps;
      ps.format_ok = true;
      ps.payload_ok = true;
      ps.cls = pred.cls;
      ps.sev = pred.sev;
      const auto want = oracle::score_prediction(ps, GroundTruth(gt), TaskKind::kDegradation, cfg);
      CHECK(got.r_fmt == want.r_fmt);
      CHECK(got.r_deg == want.r_deg);
      CHECK(got.r_lev == want.r_lev);
      CHECK(got.total == want.total);
    }
  }
}
