#ifndef GQL_POLICY_HPP_
#define GQL_POLICY_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gql/env.hpp"
#include "gql/rng.hpp"
#include "gql/types.hpp"
#include "gql/vocab.hpp"

namespace gql {

// Autoregressive categorical policy over the token vocabulary.
//
// Each position t has its own affine head over [context encoding ;
// mean-pooled embedding of the tokens emitted before t], so log-probability
// gradients are closed-form and no autodiff is needed.
struct PolicyDims {
  int context_dim = 20;  // feature_dim + 3 task slots + 1 constant slot
  int hidden_dim = 32;
  int embed_dim = 16;
  int max_len = 16;
  int vocab_size = 48;

  int head_in() const { return hidden_dim + embed_dim; }
  void validate() const;
};

struct PolicyParams {
  PolicyDims dims;
  Vocabulary vocab;
  std::vector<double> enc_w;   // hidden_dim x context_dim
  std::vector<double> enc_b;   // hidden_dim
  std::vector<double> emb;     // vocab_size x embed_dim
  std::vector<double> head_w;  // max_len x vocab_size x head_in
  std::vector<double> head_b;  // max_len x vocab_size

  std::size_t param_count() const;
  void validate() const;
};

// Offsets of each parameter block inside the flat gradient vector.
struct ParamLayout {
  std::size_t enc_w = 0, enc_b = 0, emb = 0, head_w = 0, head_b = 0, total = 0;
  explicit ParamLayout(const PolicyDims& d);
};

// Near-uniform initialization: weights uniform with standard deviation
// `weight_scale`, biases zero.
PolicyParams init_policy(const PolicyDims& dims, const Vocabulary& vocab, std::uint64_t seed,
                         double weight_scale = 0.1);

// Deep immutable copy for the old-policy / reference-policy roles.
inline PolicyParams snapshot(const PolicyParams& p) { return p; }

// Context vector: normalized features (feature difference for comparison
// pairs), a +/-1 task indicator triple, and a constant-one slot.
std::vector<double> encode_context(const SyntheticSample& sample, TaskKind task,
                                   const EnvConfig& env, int context_dim);

struct SequenceSample {
  std::vector<int> tokens;
  std::vector<double> token_logps;
  double total_logp = 0.0;
};

// One autoregressive draw; terminates at <eos> or max_len. Bit-reproducible
// for a fixed rng state. Throws DivergenceError on non-finite logits.
SequenceSample sample_sequence(const PolicyParams& params, std::span<const double> ctx, Rng& rng);

double sequence_log_prob(const PolicyParams& params, std::span<const double> ctx,
                         std::span<const int> tokens);

// Argmax decoding, evaluation only.
std::vector<int> greedy_decode(const PolicyParams& params, std::span<const double> ctx);

// Cached forward pass over a fixed token sequence.
struct ForwardTrace {
  int len = 0;
  double seq_logp = 0.0;
  std::vector<double> head_in;    // len x (hidden+embed), the per-position input
  std::vector<double> probs;      // len x vocab, softmax rows
  std::vector<double> log_probs;  // len x vocab, log-softmax rows
};

ForwardTrace forward_trace(const PolicyParams& params, std::span<const double> ctx,
                           std::span<const int> tokens);

// grad += chain of d(objective)/d(logits) rows through heads, encoder, and
// embeddings. g_logits has trace.len x vocab entries.
void backward_from_logits(const PolicyParams& params, std::span<const double> ctx,
                          std::span<const int> tokens, const ForwardTrace& trace,
                          std::span<const double> g_logits, std::span<double> grad);

// grad += weight * d(sequence log-prob)/d(params).
void accumulate_log_prob_grad(const PolicyParams& params, std::span<const double> ctx,
                              std::span<const int> tokens, double weight,
                              std::span<double> grad);

enum class KlMode { kExact, kK3 };

// KL between the new and reference per-position categorical distributions
// along this sequence (exact mode), or the sequence-level k3 estimator
// r - ln r - 1 with r = p_ref/p_new.
double kl_penalty(const PolicyParams& params_new, const PolicyParams& params_ref,
                  std::span<const double> ctx, std::span<const int> tokens, KlMode mode);

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);

// Constructed reference policy that demonstrates the response grammar:
// position-templated distributions over well-formed think/answer scaffolds
// with task-conditional answer bodies and near-uniform payload values.
// Desk-scale stand-in for the frozen pretrained model the KL penalty
// usually anchors to.
PolicyParams make_format_reference(const PolicyDims& dims, const Vocabulary& vocab,
                                   double sharpness = 8.0);

}  // namespace gql

#endif  // GQL_POLICY_HPP_
