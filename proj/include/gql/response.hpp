#ifndef GQL_RESPONSE_HPP_
#define GQL_RESPONSE_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "gql/types.hpp"

namespace gql {

// A raw sampled response split into its think/answer segments.
//
// structure_ok: exactly one <think>..</think> followed by exactly one
// <answer>..</answer>, nothing but whitespace before, between, or after the
// two blocks. json_shape_ok: the answer body (whitespace-trimmed) starts
// with '{', ends with '}', and contains no other brace characters.
// think_body is empty unless the full structure holds; answer_body is
// extracted whenever a unique ordered answer block exists, so task rewards
// stay reachable when only the think side is broken.
struct ParsedResponse {
  std::string raw_text;
  std::string think_body;
  std::string answer_body;
  bool structure_ok = false;
  bool json_shape_ok = false;
};

struct RatingAnswer {
  double value = 0.0;
};

struct DegradationAnswer {
  DegradationClass cls = DegradationClass::kNull;
  SeverityLevel sev = SeverityLevel::kNone;
};

struct ComparisonAnswer {
  Choice choice = Choice::kSimilar;
};

using ParsedAnswer = std::variant<RatingAnswer, DegradationAnswer, ComparisonAnswer>;

bool answers_equal(const ParsedAnswer& a, const ParsedAnswer& b);

// Total and deterministic: any byte string yields a ParsedResponse.
ParsedResponse parse_response(std::string_view raw_text);

// 1 iff both structural flags hold; ignores answer semantics entirely.
inline double format_reward(const ParsedResponse& p) {
  return (p.structure_ok && p.json_shape_ok) ? 1.0 : 0.0;
}

// Extracts the task's keys from the flat key:value answer body.
// Values are trimmed, unquoted once, and matched case-insensitively against
// the closed vocabularies; ratings parse as decimal reals at full precision.
// nullopt means parse failure, which zeroes every task reward downstream.
std::optional<ParsedAnswer> parse_answer_payload(std::string_view answer_body, TaskKind task);

// Canonical well-formed response; the inverse of parsing. Ratings render at
// two decimal places.
std::string render_response(const ParsedAnswer& answer, std::string_view think_body);

// Answer body alone, braces included (what render_response puts between the
// answer tags).
std::string render_answer_body(const ParsedAnswer& answer);

}  // namespace gql

#endif  // GQL_RESPONSE_HPP_
