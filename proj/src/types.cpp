#include "gql/types.hpp"

#include <algorithm>
#include <cctype>

namespace gql {

std::string_view task_name(TaskKind t) {
  switch (t) {
    case TaskKind::kScore: return "score";
    case TaskKind::kDegradation: return "degradation";
    case TaskKind::kComparison: return "comparison";
  }
  return "?";
}

std::string_view class_name(DegradationClass c) {
  switch (c) {
    case DegradationClass::kNoise: return "noise";
    case DegradationClass::kBlur: return "blur";
    case DegradationClass::kJpeg: return "jpeg";
    case DegradationClass::kDarken: return "darken";
    case DegradationClass::kNull: return "null";
  }
  return "?";
}

std::string_view severity_name(SeverityLevel s) {
  switch (s) {
    case SeverityLevel::kSlight: return "slight";
    case SeverityLevel::kModerate: return "moderate";
    case SeverityLevel::kObvious: return "obvious";
    case SeverityLevel::kSerious: return "serious";
    case SeverityLevel::kCatastrophic: return "catastrophic";
    case SeverityLevel::kNone: return "null";
  }
  return "?";
}

std::string_view choice_name(Choice c) {
  switch (c) {
    case Choice::kA: return "Image A";
    case Choice::kB: return "Image B";
    case Choice::kSimilar: return "Similar";
  }
  return "?";
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::optional<TaskKind> parse_task(std::string_view s) {
  const std::string low = to_lower(s);
  if (low == "score") return TaskKind::kScore;
  if (low == "degradation") return TaskKind::kDegradation;
  if (low == "comparison") return TaskKind::kComparison;
  return std::nullopt;
}

std::optional<DegradationClass> parse_class(std::string_view s) {
  const std::string low = to_lower(s);
  if (low == "noise") return DegradationClass::kNoise;
  if (low == "blur") return DegradationClass::kBlur;
  if (low == "jpeg") return DegradationClass::kJpeg;
  if (low == "darken") return DegradationClass::kDarken;
  if (low == "null") return DegradationClass::kNull;
  return std::nullopt;
}

std::optional<SeverityLevel> parse_severity(std::string_view s) {
  const std::string low = to_lower(s);
  if (low == "slight") return SeverityLevel::kSlight;
  if (low == "moderate") return SeverityLevel::kModerate;
  if (low == "obvious") return SeverityLevel::kObvious;
  if (low == "serious") return SeverityLevel::kSerious;
  if (low == "catastrophic") return SeverityLevel::kCatastrophic;
  if (low == "null") return SeverityLevel::kNone;
  return std::nullopt;
}

std::optional<Choice> parse_choice(std::string_view s) {
  const std::string low = to_lower(s);
  if (low == "image a") return Choice::kA;
  if (low == "image b") return Choice::kB;
  if (low == "similar") return Choice::kSimilar;
  return std::nullopt;
}

}  // namespace gql
