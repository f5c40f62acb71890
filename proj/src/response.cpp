#include "gql/response.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

namespace gql {
namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

std::vector<size_t> find_all(std::string_view text, std::string_view needle) {
  std::vector<size_t> hits;
  size_t pos = text.find(needle);
  while (pos != std::string_view::npos) {
    hits.push_back(pos);
    pos = text.find(needle, pos + 1);
  }
  return hits;
}

bool whitespace_only(std::string_view s) { return trim(s).empty(); }

// Strips one layer of matching double quotes after trimming.
std::string_view unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s.remove_prefix(1);
    s.remove_suffix(1);
  }
  return s;
}

// Locates `"key"` (case-insensitive) followed by ':' and returns the raw
// value text up to the next ',' , '}' or end of body.
std::optional<std::string_view> extract_value(std::string_view body, std::string_view key) {
  const std::string low_body = to_lower(body);
  const std::string needle = "\"" + std::string(key) + "\"";
  size_t pos = low_body.find(needle);
  while (pos != std::string::npos) {
    size_t after = pos + needle.size();
    while (after < body.size() && std::isspace(static_cast<unsigned char>(body[after]))) ++after;
    if (after < body.size() && body[after] == ':') {
      size_t start = after + 1;
      size_t end = start;
      while (end < body.size() && body[end] != ',' && body[end] != '}') ++end;
      return body.substr(start, end - start);
    }
    pos = low_body.find(needle, pos + 1);
  }
  return std::nullopt;
}

std::optional<double> parse_finite_real(std::string_view raw) {
  const std::string text(unquote(raw));
  if (text.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

ParsedResponse parse_response(std::string_view raw_text) {
  ParsedResponse out;
  out.raw_text = std::string(raw_text);

  const auto to = find_all(raw_text, kThinkOpen);
  const auto ao = find_all(raw_text, kAnswerOpen);
  const auto tc = find_all(raw_text, kThinkClose);
  const auto ac = find_all(raw_text, kAnswerClose);

  // Extract the answer body whenever a unique well-formed answer block
  // exists; task rewards stay reachable even when the think block is broken.
  if (ao.size() == 1 && ac.size() == 1 && ao[0] < ac[0]) {
    out.answer_body =
        std::string(raw_text.substr(ao[0] + kAnswerOpen.size(), ac[0] - ao[0] - kAnswerOpen.size()));
  }

  const bool counts_ok = to.size() == 1 && tc.size() == 1 && ao.size() == 1 && ac.size() == 1;
  bool ordered = false;
  if (counts_ok) {
    ordered = to[0] < tc[0] && tc[0] < ao[0] && ao[0] < ac[0];
  }
  if (counts_ok && ordered) {
    const bool prefix_ok = whitespace_only(raw_text.substr(0, to[0]));
    const bool gap_ok = whitespace_only(
        raw_text.substr(tc[0] + kThinkClose.size(), ao[0] - tc[0] - kThinkClose.size()));
    const bool suffix_ok = whitespace_only(raw_text.substr(ac[0] + kAnswerClose.size()));
    if (prefix_ok && gap_ok && suffix_ok) {
      out.structure_ok = true;
      out.think_body =
          std::string(raw_text.substr(to[0] + kThinkOpen.size(), tc[0] - to[0] - kThinkOpen.size()));
    }
  }
  const std::string_view body = trim(out.answer_body);
  if (!body.empty() && body.front() == '{' && body.back() == '}') {
    int opens = 0, closes = 0;
    for (char c : body) {
      opens += c == '{';
      closes += c == '}';
    }
    out.json_shape_ok = opens == 1 && closes == 1;
  }
  return out;
}

std::optional<ParsedAnswer> parse_answer_payload(std::string_view answer_body, TaskKind task) {
  switch (task) {
    case TaskKind::kScore: {
      const auto raw = extract_value(answer_body, "rating");
      if (!raw) return std::nullopt;
      const auto v = parse_finite_real(*raw);
      if (!v) return std::nullopt;
      return ParsedAnswer(RatingAnswer{*v});
    }
    case TaskKind::kDegradation: {
      const auto raw_cls = extract_value(answer_body, "distortion_class");
      const auto raw_sev = extract_value(answer_body, "severity");
      if (!raw_cls || !raw_sev) return std::nullopt;
      const auto cls = parse_class(unquote(*raw_cls));
      const auto sev = parse_severity(unquote(*raw_sev));
      if (!cls || !sev) return std::nullopt;
      if (!valid_class_severity(*cls, *sev)) return std::nullopt;
      return ParsedAnswer(DegradationAnswer{*cls, *sev});
    }
    case TaskKind::kComparison: {
      const auto raw = extract_value(answer_body, "choice");
      if (!raw) return std::nullopt;
      const auto c = parse_choice(unquote(*raw));
      if (!c) return std::nullopt;
      return ParsedAnswer(ComparisonAnswer{*c});
    }
  }
  return std::nullopt;
}

std::string render_answer_body(const ParsedAnswer& answer) {
  char buf[64];
  if (const auto* r = std::get_if<RatingAnswer>(&answer)) {
    std::snprintf(buf, sizeof buf, "{\"rating\": %.2f}", r->value);
    return buf;
  }
  if (const auto* d = std::get_if<DegradationAnswer>(&answer)) {
    std::string out = "{\"distortion_class\": \"";
    out += class_name(d->cls);
    out += "\", \"severity\": \"";
    out += severity_name(d->sev);
    out += "\"}";
    return out;
  }
  const auto& c = std::get<ComparisonAnswer>(answer);
  return std::string("{\"choice\": \"") + std::string(choice_name(c.choice)) + "\"}";
}

std::string render_response(const ParsedAnswer& answer, std::string_view think_body) {
  std::string out = "<think>";
  out += think_body;
  out += "</think><answer>";
  out += render_answer_body(answer);
  out += "</answer>";
  return out;
}

bool answers_equal(const ParsedAnswer& a, const ParsedAnswer& b) {
  if (a.index() != b.index()) return false;
  if (const auto* r = std::get_if<RatingAnswer>(&a)) {
    return r->value == std::get<RatingAnswer>(b).value;
  }
  if (const auto* d = std::get_if<DegradationAnswer>(&a)) {
    const auto& o = std::get<DegradationAnswer>(b);
    return d->cls == o.cls && d->sev == o.sev;
  }
  return std::get<ComparisonAnswer>(a).choice == std::get<ComparisonAnswer>(b).choice;
}

}  // namespace gql
