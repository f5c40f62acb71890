#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gql/response.hpp"
#include "gql/rng.hpp"
#include "gql/vocab.hpp"

using namespace gql;

TEST_CASE("parse_response recognizes the canonical shape") {
  const auto p = parse_response("<think>blurry sky</think><answer>{\"rating\": 3.20}</answer>");
  CHECK(p.structure_ok);
  CHECK(p.json_shape_ok);
  CHECK(p.think_body == "blurry sky");
  CHECK(p.answer_body == "{\"rating\": 3.20}");
}

TEST_CASE("missing think block fails structure") {
  const auto p = parse_response("<answer>{\"rating\": 3}</answer>");
  CHECK_FALSE(p.structure_ok);
  CHECK(p.json_shape_ok);  // answer block itself is fine
  CHECK(p.think_body.empty());
}

TEST_CASE("nested braces fail the shape rule only") {
  const auto p = parse_response("<think>x</think><answer>{\"a\":{\"b\":1}}</answer>");
  CHECK(p.structure_ok);
  CHECK_FALSE(p.json_shape_ok);
}

TEST_CASE("whitespace around and between blocks is permitted") {
  const auto p = parse_response("  <think>a</think>\n <answer>{\"rating\": 1.00}</answer>  \n");
  CHECK(p.structure_ok);
  CHECK(p.json_shape_ok);
}

TEST_CASE("stray text or duplicate blocks fail structure") {
  CHECK_FALSE(parse_response("hi<think>a</think><answer>{}</answer>").structure_ok);
  CHECK_FALSE(parse_response("<think>a</think>oops<answer>{}</answer>").structure_ok);
  CHECK_FALSE(parse_response("<think>a</think><answer>{}</answer>bye").structure_ok);
  CHECK_FALSE(
      parse_response("<think>a</think><think>b</think><answer>{}</answer>").structure_ok);
  CHECK_FALSE(
      parse_response("<think>a</think><answer>{}</answer><answer>{}</answer>").structure_ok);
  CHECK_FALSE(parse_response("<answer>{}</answer><think>a</think>").structure_ok);
}

TEST_CASE("malformed structure yields empty bodies") {
  const auto p = parse_response("<think>abc");
  CHECK_FALSE(p.structure_ok);
  CHECK(p.think_body.empty());
  CHECK(p.answer_body.empty());
}

TEST_CASE("format reward is the conjunction of both flags") {
  ParsedResponse p;
  p.structure_ok = true;
  p.json_shape_ok = true;
  CHECK(format_reward(p) == 1.0);
  p.json_shape_ok = false;
  CHECK(format_reward(p) == 0.0);
  p.structure_ok = false;
  p.json_shape_ok = true;
  CHECK(format_reward(p) == 0.0);
}

TEST_CASE("totality: token soup never crashes and parses deterministically") {
  const Vocabulary vocab = make_default_vocab();
  Rng rng(42);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text;
    const int len = static_cast<int>(rng.uniform01() * 20);
    for (int i = 0; i < len; ++i) {
      text += vocab.surface(static_cast<int>(rng.uniform01() * vocab.size()));
    }
    const auto a = parse_response(text);
    const auto b = parse_response(text);
    CHECK(a.structure_ok == b.structure_ok);
    CHECK(a.json_shape_ok == b.json_shape_ok);
    CHECK(a.answer_body == b.answer_body);
  }
}

TEST_CASE("brace rule matches exhaustive small-string enumeration") {
  // every body over a 4-letter alphabet up to length 6
  const char alphabet[] = {'{', '}', 'a', ' '};
  std::vector<std::string> bodies = {""};
  for (int len = 1; len <= 6; ++len) {
    std::vector<std::string> next;
    for (const auto& b : bodies) {
      if (static_cast<int>(b.size()) == len - 1) {
        for (char c : alphabet) next.push_back(b + c);
      } else {
        next.push_back(b);
      }
    }
    for (const auto& b : next) {
      if (static_cast<int>(b.size()) != len) continue;
      const std::string text = "<think>t</think><answer>" + b + "</answer>";
      const auto p = parse_response(text);
      // independent restatement: trimmed body brackets at the extremes,
      // exactly one of each brace anywhere
      std::string trimmed(trim(b));
      const int opens = static_cast<int>(std::count(b.begin(), b.end(), '{'));
      const int closes = static_cast<int>(std::count(b.begin(), b.end(), '}'));
      const bool expect = !trimmed.empty() && trimmed.front() == '{' && trimmed.back() == '}' &&
                          opens == 1 && closes == 1;
      CHECK(p.json_shape_ok == expect);
    }
    bodies = std::move(next);
  }
}

TEST_CASE("payload extraction per task") {
  const auto rating = parse_answer_payload("{\"rating\": 4.25}", TaskKind::kScore);
  REQUIRE(rating.has_value());
  CHECK(std::get<RatingAnswer>(*rating).value == 4.25);

  const auto deg = parse_answer_payload(
      "{\"distortion_class\": \"noise\", \"severity\": \"serious\"}", TaskKind::kDegradation);
  REQUIRE(deg.has_value());
  CHECK(std::get<DegradationAnswer>(*deg).cls == DegradationClass::kNoise);
  CHECK(std::get<DegradationAnswer>(*deg).sev == SeverityLevel::kSerious);

  CHECK_FALSE(parse_answer_payload("{\"rating\": \"good\"}", TaskKind::kScore).has_value());
}

TEST_CASE("payload edge cases") {
  // case-insensitive values after trimming
  const auto deg = parse_answer_payload("{\"distortion_class\": \"JPEG\", \"severity\": SLIGHT}",
                                        TaskKind::kDegradation);
  REQUIRE(deg.has_value());
  CHECK(std::get<DegradationAnswer>(*deg).cls == DegradationClass::kJpeg);

  // missing keys
  CHECK_FALSE(parse_answer_payload("{\"severity\": \"slight\"}", TaskKind::kDegradation));
  CHECK_FALSE(parse_answer_payload("{}", TaskKind::kScore));
  // outside the closed vocabulary
  CHECK_FALSE(parse_answer_payload("{\"distortion_class\": \"rain\", \"severity\": \"slight\"}",
                                   TaskKind::kDegradation));
  // null class pairs only with null severity
  CHECK_FALSE(parse_answer_payload("{\"distortion_class\": \"null\", \"severity\": \"slight\"}",
                                   TaskKind::kDegradation));
  CHECK(parse_answer_payload("{\"distortion_class\": \"null\", \"severity\": \"null\"}",
                             TaskKind::kDegradation)
            .has_value());
  // non-finite ratings are rejected
  CHECK_FALSE(parse_answer_payload("{\"rating\": inf}", TaskKind::kScore).has_value());
  // braces are not required for key extraction (the shape flag covers those)
  CHECK(parse_answer_payload("\"rating\": 2.5", TaskKind::kScore).has_value());
}

TEST_CASE("render examples") {
  CHECK(render_response(ParsedAnswer(RatingAnswer{3.0}), "flat light") ==
        "<think>flat light</think><answer>{\"rating\": 3.00}</answer>");
  const std::string comp = render_response(ParsedAnswer(ComparisonAnswer{Choice::kA}), "sharper edges");
  CHECK(comp.find("Image A") != std::string::npos);
}

TEST_CASE("round-trip over the closed vocabularies") {
  std::vector<ParsedAnswer> answers;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto cls = static_cast<DegradationClass>(c);
    if (cls == DegradationClass::kNull) {
      answers.emplace_back(DegradationAnswer{cls, SeverityLevel::kNone});
      continue;
    }
    for (int s = 0; s < 5; ++s) {
      answers.emplace_back(DegradationAnswer{cls, static_cast<SeverityLevel>(s)});
    }
  }
  for (int ch = 0; ch < 3; ++ch) answers.emplace_back(ComparisonAnswer{static_cast<Choice>(ch)});
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const double grid = std::round(rng.uniform(-2.0, 9.0) * 100.0) / 100.0;
    answers.emplace_back(RatingAnswer{grid});
  }

  for (const auto& a : answers) {
    const TaskKind task = std::holds_alternative<RatingAnswer>(a) ? TaskKind::kScore
                          : std::holds_alternative<DegradationAnswer>(a)
                              ? TaskKind::kDegradation
                              : TaskKind::kComparison;
    const std::string text = render_response(a, "t");
    const auto parsed = parse_response(text);
    CHECK(parsed.structure_ok);
    CHECK(parsed.json_shape_ok);
    const auto back = parse_answer_payload(parsed.answer_body, task);
    REQUIRE(back.has_value());
    CHECK(answers_equal(a, *back));
  }
}

TEST_CASE("canonical token sequences detokenize to canonical text") {
  const Vocabulary v = make_default_vocab();
  const std::vector<int> seq = {v.think_open,  v.filler_tok[0], v.think_close, v.answer_open,
                                v.brace_open,  v.key_class,     v.class_tok[0], v.comma,
                                v.key_severity, v.severity_tok[3], v.brace_close, v.answer_close,
                                v.eos_id()};
  const std::string text = v.detokenize(seq);
  const auto p = parse_response(text);
  CHECK(p.structure_ok);
  CHECK(p.json_shape_ok);
  const auto payload = parse_answer_payload(p.answer_body, TaskKind::kDegradation);
  REQUIRE(payload.has_value());
  CHECK(std::get<DegradationAnswer>(*payload).cls == DegradationClass::kNoise);
  CHECK(std::get<DegradationAnswer>(*payload).sev == SeverityLevel::kSerious);
}
