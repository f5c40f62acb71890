#include "gql/policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace gql {
namespace {

// logits -> log-softmax in place; returns logsumexp. Throws if non-finite.
double log_softmax_inplace(std::span<double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  // catches NaN as well: max() ignores NaN but the sum propagates it
  if (!std::isfinite(lse)) throw DivergenceError("non-finite logits in policy forward");
  for (double& v : logits) v -= lse;
  return lse;
}

void check_tokens(const PolicyDims& dims, std::span<const int> tokens) {
  if (static_cast<int>(tokens.size()) > dims.max_len) {
    throw ConfigError("token sequence longer than max_len");
  }
  for (int t : tokens) {
    if (t < 0 || t >= dims.vocab_size) throw ConfigError("token id out of range");
  }
}

// Incremental forward state shared by sampling, scoring, and decoding.
struct Cursor {
  const PolicyParams& p;
  std::vector<double> enc;      // hidden_dim
  std::vector<double> emb_sum;  // embed_dim, sum of emitted token embeddings
  int emitted = 0;

  Cursor(const PolicyParams& params, std::span<const double> ctx)
      : p(params), enc(params.dims.hidden_dim, 0.0), emb_sum(params.dims.embed_dim, 0.0) {
    if (static_cast<int>(ctx.size()) != p.dims.context_dim) {
      throw ConfigError("context vector has wrong dimension");
    }
    const int H = p.dims.hidden_dim, F = p.dims.context_dim;
    for (int h = 0; h < H; ++h) {
      double acc = p.enc_b[h];
      const double* row = &p.enc_w[static_cast<size_t>(h) * F];
      for (int f = 0; f < F; ++f) acc += row[f] * ctx[f];
      enc[h] = acc;
    }
  }

  // Fills the head input [enc ; mean prefix embedding] for the next position.
  void head_input(std::span<double> x) const {
    const int H = p.dims.hidden_dim, E = p.dims.embed_dim;
    std::memcpy(x.data(), enc.data(), sizeof(double) * H);
    const double inv = emitted > 0 ? 1.0 / emitted : 0.0;
    for (int e = 0; e < E; ++e) x[H + e] = emb_sum[e] * inv;
  }

  void logits_at(int t, std::span<const double> x, std::span<double> out) const {
    const int V = p.dims.vocab_size, D = p.dims.head_in();
    const double* wt = &p.head_w[static_cast<size_t>(t) * V * D];
    const double* bt = &p.head_b[static_cast<size_t>(t) * V];
    for (int v = 0; v < V; ++v) {
      double acc = bt[v];
      const double* row = wt + static_cast<size_t>(v) * D;
      for (int d = 0; d < D; ++d) acc += row[d] * x[d];
      out[v] = acc;
    }
  }

  void push(int token) {
    const int E = p.dims.embed_dim;
    const double* row = &p.emb[static_cast<size_t>(token) * E];
    for (int e = 0; e < E; ++e) emb_sum[e] += row[e];
    ++emitted;
  }
};

}  // namespace

void PolicyDims::validate() const {
  if (context_dim < 1 || hidden_dim < 1 || embed_dim < 1 || max_len < 1 || vocab_size < 2) {
    throw ConfigError("policy dimensions must be positive (vocab >= 2)");
  }
}

std::size_t PolicyParams::param_count() const { return ParamLayout(dims).total; }

void PolicyParams::validate() const {
  dims.validate();
  if (vocab.size() != dims.vocab_size) throw ConfigError("vocab size does not match dims");
  const ParamLayout lay(dims);
  if (enc_w.size() != lay.enc_b - lay.enc_w || enc_b.size() != lay.emb - lay.enc_b ||
      emb.size() != lay.head_w - lay.emb || head_w.size() != lay.head_b - lay.head_w ||
      head_b.size() != lay.total - lay.head_b) {
    throw ConfigError("parameter array shapes are inconsistent");
  }
  for (const auto* arr : {&enc_w, &enc_b, &emb, &head_w, &head_b}) {
    for (double v : *arr) {
      if (!std::isfinite(v)) throw ConfigError("non-finite parameter value");
    }
  }
}

ParamLayout::ParamLayout(const PolicyDims& d) {
  enc_w = 0;
  enc_b = enc_w + static_cast<size_t>(d.hidden_dim) * d.context_dim;
  emb = enc_b + d.hidden_dim;
  head_w = emb + static_cast<size_t>(d.vocab_size) * d.embed_dim;
  head_b = head_w + static_cast<size_t>(d.max_len) * d.vocab_size * d.head_in();
  total = head_b + static_cast<size_t>(d.max_len) * d.vocab_size;
}

PolicyParams init_policy(const PolicyDims& dims, const Vocabulary& vocab, std::uint64_t seed,
                         double weight_scale) {
  dims.validate();
  if (vocab.size() != dims.vocab_size) throw ConfigError("vocab size does not match dims");
  PolicyParams p;
  p.dims = dims;
  p.vocab = vocab;
  const ParamLayout lay(dims);
  p.enc_w.resize(lay.enc_b - lay.enc_w);
  p.enc_b.assign(dims.hidden_dim, 0.0);
  p.emb.resize(lay.head_w - lay.emb);
  p.head_w.resize(lay.head_b - lay.head_w);
  p.head_b.assign(static_cast<size_t>(dims.max_len) * dims.vocab_size, 0.0);

  // uniform on [-a, a] has standard deviation a/sqrt(3)
  const double a = weight_scale * std::sqrt(3.0);
  const Rng root(seed);
  int stream = 0;
  for (auto* arr : {&p.enc_w, &p.emb, &p.head_w}) {
    Rng rng = root.derive(stream++);
    for (auto& v : *arr) v = rng.uniform(-a, a);
  }
  return p;
}

std::vector<double> encode_context(const SyntheticSample& sample, TaskKind task,
                                   const EnvConfig& env, int context_dim) {
  const int fd = env.feature_dim;
  if (context_dim != fd + 4) throw ConfigError("context_dim must equal feature_dim + 4");
  if (static_cast<int>(sample.features.size()) != fd) {
    throw ConfigError("sample feature dimension mismatch");
  }
  std::vector<double> ctx(context_dim, 0.0);
  if (task == TaskKind::kComparison) {
    if (static_cast<int>(sample.features_b.size()) != fd) {
      throw ConfigError("comparison sample is missing features_b");
    }
    for (int i = 0; i < fd; ++i) {
      ctx[i] = (sample.features[i] - sample.features_b[i]) / env.feature_scale;
    }
  } else {
    for (int i = 0; i < fd; ++i) {
      ctx[i] = (sample.features[i] - env.feature_loc) / env.feature_scale;
    }
  }
  ctx[fd + 0] = task == TaskKind::kScore ? 1.0 : -1.0;
  ctx[fd + 1] = task == TaskKind::kDegradation ? 1.0 : -1.0;
  ctx[fd + 2] = task == TaskKind::kComparison ? 1.0 : -1.0;
  ctx[fd + 3] = 1.0;
  return ctx;
}

SequenceSample sample_sequence(const PolicyParams& params, std::span<const double> ctx, Rng& rng) {
  const int V = params.dims.vocab_size, L = params.dims.max_len;
  Cursor cur(params, ctx);
  std::vector<double> x(params.dims.head_in()), row(V), probs(V);
  SequenceSample out;
  for (int t = 0; t < L; ++t) {
    cur.head_input(x);
    cur.logits_at(t, x, row);
    log_softmax_inplace(row);
    for (int v = 0; v < V; ++v) probs[v] = std::exp(row[v]);
    const int tok = rng.categorical(probs);
    out.tokens.push_back(tok);
    out.token_logps.push_back(row[tok]);
    out.total_logp += row[tok];
    if (tok == params.vocab.eos_id()) break;
    cur.push(tok);
  }
  return out;
}

double sequence_log_prob(const PolicyParams& params, std::span<const double> ctx,
                         std::span<const int> tokens) {
  check_tokens(params.dims, tokens);
  const int V = params.dims.vocab_size;
  Cursor cur(params, ctx);
  std::vector<double> x(params.dims.head_in()), row(V);
  double total = 0.0;
  for (size_t t = 0; t < tokens.size(); ++t) {
    cur.head_input(x);
    cur.logits_at(static_cast<int>(t), x, row);
    log_softmax_inplace(row);
    total += row[tokens[t]];
    cur.push(tokens[t]);
  }
  return total;
}

std::vector<int> greedy_decode(const PolicyParams& params, std::span<const double> ctx) {
  const int V = params.dims.vocab_size, L = params.dims.max_len;
  Cursor cur(params, ctx);
  std::vector<double> x(params.dims.head_in()), row(V);
  std::vector<int> tokens;
  for (int t = 0; t < L; ++t) {
    cur.head_input(x);
    cur.logits_at(t, x, row);
    int best = 0;
    for (int v = 1; v < V; ++v) {
      if (row[v] > row[best]) best = v;
    }
    tokens.push_back(best);
    if (best == params.vocab.eos_id()) break;
    cur.push(best);
  }
  return tokens;
}

ForwardTrace forward_trace(const PolicyParams& params, std::span<const double> ctx,
                           std::span<const int> tokens) {
  check_tokens(params.dims, tokens);
  const int V = params.dims.vocab_size, D = params.dims.head_in();
  const int n = static_cast<int>(tokens.size());
  ForwardTrace tr;
  tr.len = n;
  tr.head_in.resize(static_cast<size_t>(n) * D);
  tr.probs.resize(static_cast<size_t>(n) * V);
  tr.log_probs.resize(static_cast<size_t>(n) * V);
  Cursor cur(params, ctx);
  for (int t = 0; t < n; ++t) {
    std::span<double> x(&tr.head_in[static_cast<size_t>(t) * D], D);
    std::span<double> lp(&tr.log_probs[static_cast<size_t>(t) * V], V);
    cur.head_input(x);
    cur.logits_at(t, x, lp);
    log_softmax_inplace(lp);
    for (int v = 0; v < V; ++v) tr.probs[static_cast<size_t>(t) * V + v] = std::exp(lp[v]);
    tr.seq_logp += lp[tokens[t]];
    cur.push(tokens[t]);
  }
  return tr;
}

void backward_from_logits(const PolicyParams& params, std::span<const double> ctx,
                          std::span<const int> tokens, const ForwardTrace& trace,
                          std::span<const double> g_logits, std::span<double> grad) {
  const PolicyDims& d = params.dims;
  const int V = d.vocab_size, D = d.head_in(), H = d.hidden_dim, E = d.embed_dim;
  const ParamLayout lay(d);
  if (grad.size() != lay.total) throw ConfigError("gradient buffer has wrong size");
  if (g_logits.size() != static_cast<size_t>(trace.len) * V) {
    throw ConfigError("logit gradient rows have wrong size");
  }

  std::vector<double> d_enc(H, 0.0);
  for (int t = 0; t < trace.len; ++t) {
    const double* gz = &g_logits[static_cast<size_t>(t) * V];
    const double* x = &trace.head_in[static_cast<size_t>(t) * D];
    double* gb = &grad[lay.head_b + static_cast<size_t>(t) * V];
    double* gw = &grad[lay.head_w + static_cast<size_t>(t) * V * D];
    const double* w = &params.head_w[static_cast<size_t>(t) * V * D];

    std::vector<double> dx(D, 0.0);
    for (int v = 0; v < V; ++v) {
      const double g = gz[v];
      if (g == 0.0) continue;
      gb[v] += g;
      double* gwrow = gw + static_cast<size_t>(v) * D;
      const double* wrow = w + static_cast<size_t>(v) * D;
      for (int i = 0; i < D; ++i) {
        gwrow[i] += g * x[i];
        dx[i] += g * wrow[i];
      }
    }
    for (int h = 0; h < H; ++h) d_enc[h] += dx[h];
    // mean-pooled prefix embedding: position t sees tokens[0..t-1] / t
    if (t > 0) {
      const double inv = 1.0 / t;
      for (int j = 0; j < t; ++j) {
        double* ge = &grad[lay.emb + static_cast<size_t>(tokens[j]) * E];
        for (int e = 0; e < E; ++e) ge[e] += dx[H + e] * inv;
      }
    }
  }

  const int F = d.context_dim;
  for (int h = 0; h < H; ++h) {
    if (d_enc[h] == 0.0) continue;
    grad[lay.enc_b + h] += d_enc[h];
    double* gw = &grad[lay.enc_w + static_cast<size_t>(h) * F];
    for (int f = 0; f < F; ++f) gw[f] += d_enc[h] * ctx[f];
  }
}

void accumulate_log_prob_grad(const PolicyParams& params, std::span<const double> ctx,
                              std::span<const int> tokens, double weight,
                              std::span<double> grad) {
  const ForwardTrace tr = forward_trace(params, ctx, tokens);
  const int V = params.dims.vocab_size;
  std::vector<double> gz(static_cast<size_t>(tr.len) * V);
  for (int t = 0; t < tr.len; ++t) {
    const double* p = &tr.probs[static_cast<size_t>(t) * V];
    double* g = &gz[static_cast<size_t>(t) * V];
    for (int v = 0; v < V; ++v) g[v] = -weight * p[v];
    g[tokens[t]] += weight;
  }
  backward_from_logits(params, ctx, tokens, tr, gz, grad);
}

double kl_penalty(const PolicyParams& params_new, const PolicyParams& params_ref,
                  std::span<const double> ctx, std::span<const int> tokens, KlMode mode) {
  if (mode == KlMode::kK3) {
    const double lpn = sequence_log_prob(params_new, ctx, tokens);
    const double lpr = sequence_log_prob(params_ref, ctx, tokens);
    const double r = std::exp(std::clamp(lpr - lpn, -50.0, 50.0));
    return r - std::log(r) - 1.0;
  }
  const ForwardTrace tn = forward_trace(params_new, ctx, tokens);
  const ForwardTrace tf = forward_trace(params_ref, ctx, tokens);
  const int V = params_new.dims.vocab_size;
  double kl = 0.0;
  for (int t = 0; t < tn.len; ++t) {
    const double* p = &tn.probs[static_cast<size_t>(t) * V];
    const double* lp = &tn.log_probs[static_cast<size_t>(t) * V];
    const double* lq = &tf.log_probs[static_cast<size_t>(t) * V];
    for (int v = 0; v < V; ++v) kl += p[v] * (lp[v] - lq[v]);
  }
  return kl;
}

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path) {
  nlohmann::ordered_json j{
      {"version", 1},
      {"dims",
       {{"F", params.dims.context_dim},
        {"H", params.dims.hidden_dim},
        {"E", params.dims.embed_dim},
        {"L", params.dims.max_len},
        {"V", params.dims.vocab_size}}},
      {"vocab", params.vocab.tokens()},
      {"arrays",
       {{"enc_w", params.enc_w},
        {"enc_b", params.enc_b},
        {"emb", params.emb},
        {"head_w", params.head_w},
        {"head_b", params.head_b}}},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("checkpoint write failed: " + path.string());
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("checkpoint parse error in " + path.string() + ": " + e.what());
  }
  try {
    PolicyParams p;
    if (j.at("version").get<int>() != 1) throw ConfigError("unsupported checkpoint version");
    const auto& d = j.at("dims");
    p.dims.context_dim = d.at("F").get<int>();
    p.dims.hidden_dim = d.at("H").get<int>();
    p.dims.embed_dim = d.at("E").get<int>();
    p.dims.max_len = d.at("L").get<int>();
    p.dims.vocab_size = d.at("V").get<int>();
    p.vocab = Vocabulary(j.at("vocab").get<std::vector<std::string>>());
    const auto& a = j.at("arrays");
    p.enc_w = a.at("enc_w").get<std::vector<double>>();
    p.enc_b = a.at("enc_b").get<std::vector<double>>();
    p.emb = a.at("emb").get<std::vector<double>>();
    p.head_w = a.at("head_w").get<std::vector<double>>();
    p.head_b = a.at("head_b").get<std::vector<double>>();
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

PolicyParams make_format_reference(const PolicyDims& dims, const Vocabulary& vocab,
                                   double sharpness) {
  dims.validate();
  if (dims.hidden_dim < 3) throw ConfigError("format reference needs hidden_dim >= 3");
  if (dims.context_dim < 5) throw ConfigError("format reference needs context_dim >= 5");
  if (vocab.think_open < 0 || vocab.key_rating < 0) {
    throw ConfigError("format reference requires the default response vocabulary");
  }

  PolicyParams p;
  p.dims = dims;
  p.vocab = vocab;
  const ParamLayout lay(dims);
  p.enc_w.assign(static_cast<size_t>(dims.hidden_dim) * dims.context_dim, 0.0);
  p.enc_b.assign(dims.hidden_dim, 0.0);
  p.emb.assign(lay.head_w - lay.emb, 0.0);
  p.head_w.assign(lay.head_b - lay.head_w, 0.0);
  p.head_b.assign(lay.total - lay.head_b, 0.0);

  // hidden units 0..2 become {0,1} indicators of the task slots
  const int task_base = dims.context_dim - 4;
  for (int u = 0; u < 3; ++u) {
    p.enc_w[static_cast<size_t>(u) * dims.context_dim + task_base + u] = 0.5;
    p.enc_b[u] = 0.5;
  }

  const int V = dims.vocab_size, L = dims.max_len, D = dims.head_in();
  using Slot = std::vector<int>;
  const auto template_logits = [&](const std::vector<Slot>& slots) {
    std::vector<double> logits(static_cast<size_t>(L) * V, 0.0);
    for (int t = 0; t < L; ++t) {
      const Slot& s =
          t < static_cast<int>(slots.size()) ? slots[t] : Slot{vocab.eos_id()};
      for (int tok : s) logits[static_cast<size_t>(t) * V + tok] = sharpness;
    }
    return logits;
  };

  Slot digits_1to5, digits_all, classes, severities, choices, fillers;
  for (int d = 1; d <= 5; ++d) digits_1to5.push_back(vocab.digit0 + d);
  for (int d = 0; d <= 9; ++d) digits_all.push_back(vocab.digit0 + d);
  classes.assign(vocab.class_tok.begin(), vocab.class_tok.end());
  severities.assign(vocab.severity_tok.begin(), vocab.severity_tok.end());
  // the shared "null" literal doubles as the severity for undegraded images
  severities.push_back(vocab.class_tok[static_cast<int>(DegradationClass::kNull)]);
  choices.assign(vocab.choice_tok.begin(), vocab.choice_tok.end());
  fillers = vocab.filler_tok;

  const Slot opening[] = {{vocab.think_open}, fillers, {vocab.think_close},
                          {vocab.answer_open}, {vocab.brace_open}};
  const auto with_opening = [&](std::vector<Slot> tail) {
    std::vector<Slot> all(opening, opening + 5);
    for (auto& s : tail) all.push_back(std::move(s));
    return all;
  };

  const auto deg = template_logits(with_opening({{vocab.key_class},
                                                 classes,
                                                 {vocab.comma},
                                                 {vocab.key_severity},
                                                 severities,
                                                 {vocab.brace_close},
                                                 {vocab.answer_close}}));
  const auto scr = template_logits(with_opening({{vocab.key_rating},
                                                 digits_1to5,
                                                 {vocab.dot},
                                                 digits_all,
                                                 digits_all,
                                                 {vocab.brace_close},
                                                 {vocab.answer_close}}));
  const auto cmp = template_logits(with_opening(
      {{vocab.key_choice}, choices, {vocab.brace_close}, {vocab.answer_close}}));

  // degradation is the base template; hidden task units 0 (score) and
  // 2 (comparison) carry the per-task logit deltas
  for (int t = 0; t < L; ++t) {
    for (int v = 0; v < V; ++v) {
      const size_t i = static_cast<size_t>(t) * V + v;
      p.head_b[i] = deg[i];
      double* wrow = &p.head_w[(static_cast<size_t>(t) * V + v) * D];
      wrow[0] = scr[i] - deg[i];
      wrow[2] = cmp[i] - deg[i];
    }
  }
  return p;
}

}  // namespace gql
