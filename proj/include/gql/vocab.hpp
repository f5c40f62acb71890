#ifndef GQL_VOCAB_HPP_
#define GQL_VOCAB_HPP_

#include <array>
#include <span>
#include <string>
#include <vector>

#include "gql/types.hpp"

namespace gql {

// Token table for the toy policy. Tokens are atomic multi-character symbols
// (tags, answer keys, digits, value literals, think fillers); detokenization
// is plain concatenation of the surface strings.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& surface(int id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  int eos_id() const { return eos_id_; }

  // First token id with this exact surface, -1 if absent.
  int find(const std::string& surface) const;

  std::string detokenize(std::span<const int> ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

  // grammar landmark ids, -1 where the surface is absent from this vocab
  int think_open = -1, think_close = -1, answer_open = -1, answer_close = -1;
  int brace_open = -1, brace_close = -1, comma = -1, dot = -1;
  int key_rating = -1, key_class = -1, key_severity = -1, key_choice = -1;
  int digit0 = -1;                       // digits are digit0..digit0+9
  std::array<int, kNumClasses> class_tok{};
  std::array<int, 5> severity_tok{};     // slight..catastrophic; null shares class_tok[kNull]
  std::array<int, 3> choice_tok{};
  std::vector<int> filler_tok;

 private:
  std::vector<std::string> tokens_;
  int eos_id_ = -1;
};

// The 48-token response vocabulary used by the trainer.
Vocabulary make_default_vocab();

// Arbitrary small vocabulary ("t0".."tN-2", <eos>) for numeric tests.
Vocabulary make_test_vocab(int size);

}  // namespace gql

#endif  // GQL_VOCAB_HPP_
