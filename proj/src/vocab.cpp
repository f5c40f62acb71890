#include "gql/vocab.hpp"

#include <unordered_set>

namespace gql {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  std::unordered_set<std::string> seen;
  for (const auto& t : tokens_) {
    if (!seen.insert(t).second) throw ConfigError("vocabulary has duplicate token surfaces");
  }
  eos_id_ = find("<eos>");
  if (eos_id_ < 0) throw ConfigError("vocabulary is missing <eos>");

  think_open = find("<think>");
  think_close = find("</think>");
  answer_open = find("<answer>");
  answer_close = find("</answer>");
  brace_open = find("{");
  brace_close = find("}");
  key_rating = find("\"rating\": ");
  key_class = find("\"distortion_class\": ");
  key_severity = find("\"severity\": ");
  key_choice = find("\"choice\": ");
  digit0 = find("0");
  dot = find(".");
  comma = find(", ");
  class_tok = {find("\"noise\""), find("\"blur\""), find("\"jpeg\""), find("\"darken\""),
               find("\"null\"")};
  severity_tok = {find("\"slight\""), find("\"moderate\""), find("\"obvious\""),
                  find("\"serious\""), find("\"catastrophic\"")};
  choice_tok = {find("\"Image A\""), find("\"Image B\""), find("\"Similar\"")};
  for (int i = 0; i < size(); ++i) {
    const std::string& s = tokens_[i];
    if (!s.empty() && s.back() == ' ' && s.front() != '"' && s != ", ") {
      filler_tok.push_back(i);
    }
  }
}

int Vocabulary::find(const std::string& surface) const {
  for (int i = 0; i < size(); ++i) {
    if (tokens_[i] == surface) return i;
  }
  return -1;
}

std::string Vocabulary::detokenize(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == eos_id_) break;
    out += tokens_.at(id);
  }
  return out;
}

Vocabulary make_default_vocab() {
  std::vector<std::string> t;
  t.reserve(48);
  t.push_back("<think>");
  t.push_back("</think>");
  t.push_back("<answer>");
  t.push_back("</answer>");
  t.push_back("{");
  t.push_back("}");
  t.push_back("\"rating\": ");
  t.push_back("\"distortion_class\": ");
  t.push_back("\"severity\": ");
  t.push_back("\"choice\": ");
  for (int d = 0; d < 10; ++d) t.push_back(std::string(1, static_cast<char>('0' + d)));
  t.push_back(".");
  t.push_back("\"");
  t.push_back(", ");
  t.push_back("\"noise\"");
  t.push_back("\"blur\"");
  t.push_back("\"jpeg\"");
  t.push_back("\"darken\"");
  t.push_back("\"null\"");
  t.push_back("\"slight\"");
  t.push_back("\"moderate\"");
  t.push_back("\"obvious\"");
  t.push_back("\"serious\"");
  t.push_back("\"catastrophic\"");
  t.push_back("\"Image A\"");
  t.push_back("\"Image B\"");
  t.push_back("\"Similar\"");
  t.push_back("<eos>");
  // think-body fillers
  for (const char* f : {"blurry ", "sharp ", "grain ", "faded ", "crisp ", "murky ",
                        "tone ", "glow ", "haze ", "soft ", "vivid "}) {
    t.push_back(f);
  }

  return Vocabulary(std::move(t));
}

Vocabulary make_test_vocab(int size) {
  if (size < 2) throw ConfigError("test vocabulary needs at least 2 tokens");
  std::vector<std::string> t;
  for (int i = 0; i + 1 < size; ++i) t.push_back("t" + std::to_string(i) + " ");
  t.push_back("<eos>");
  return Vocabulary(std::move(t));
}

}  // namespace gql
