#ifndef GQL_TYPES_HPP_
#define GQL_TYPES_HPP_

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace gql {

// Thrown for unusable configuration (bad dimensions, invalid ranges, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when training state goes non-finite; carries a diagnostic summary.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TaskKind { kScore, kDegradation, kComparison };

enum class DegradationClass { kNoise, kBlur, kJpeg, kDarken, kNull };

// Ordinal severities rank 1..5; kNone pairs only with DegradationClass::kNull.
enum class SeverityLevel { kSlight, kModerate, kObvious, kSerious, kCatastrophic, kNone };

enum class Choice { kA, kB, kSimilar };

constexpr int kNumClasses = 5;
constexpr int kNumSeverities = 6;

std::string_view task_name(TaskKind t);
std::string_view class_name(DegradationClass c);
std::string_view severity_name(SeverityLevel s);
std::string_view choice_name(Choice c);  // "Image A" / "Image B" / "Similar"

std::optional<TaskKind> parse_task(std::string_view s);
// Case-insensitive match against the closed vocabulary; no trimming here,
// callers normalize first.
std::optional<DegradationClass> parse_class(std::string_view s);
std::optional<SeverityLevel> parse_severity(std::string_view s);
std::optional<Choice> parse_choice(std::string_view s);

// 1..5 for the real severities, 0 for kNone.
inline int severity_rank(SeverityLevel s) {
  return s == SeverityLevel::kNone ? 0 : static_cast<int>(s) + 1;
}

inline bool valid_class_severity(DegradationClass c, SeverityLevel s) {
  return (c == DegradationClass::kNull) == (s == SeverityLevel::kNone);
}

struct MosTruth {
  double mos = 0.0;
};

struct DegTruth {
  DegradationClass cls = DegradationClass::kNull;
  SeverityLevel sev = SeverityLevel::kNone;
};

struct CompTruth {
  Choice better = Choice::kSimilar;
};

using GroundTruth = std::variant<MosTruth, DegTruth, CompTruth>;

inline TaskKind truth_task(const GroundTruth& t) {
  switch (t.index()) {
    case 0: return TaskKind::kScore;
    case 1: return TaskKind::kDegradation;
    default: return TaskKind::kComparison;
  }
}

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

}  // namespace gql

#endif  // GQL_TYPES_HPP_
