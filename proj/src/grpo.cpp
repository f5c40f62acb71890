#include "gql/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gql {

void TrainConfig::validate() const {
  if (group_size < 2) throw ConfigError("group_size must be >= 2");
  if (!(clip_range > 0.0 && clip_range < 1.0)) throw ConfigError("clip_range must be in (0, 1)");
  if (kl_weight < 0.0) throw ConfigError("kl_weight must be >= 0");
  if (!(lr_end > 0.0 && lr_start >= lr_end)) {
    throw ConfigError("learning rates must satisfy lr_start >= lr_end > 0");
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (inner_steps < 1) throw ConfigError("inner_steps must be >= 1");
  reward.validate();
}

std::vector<double> normalize_advantages(std::span<const double> rewards) {
  const int n = static_cast<int>(rewards.size());
  if (n < 2) throw ConfigError("advantage normalization needs a group of >= 2");
  for (double r : rewards) {
    if (!std::isfinite(r)) throw DivergenceError("non-finite reward in group");
  }
  // anchor at the first reward; exact cancellation of constant shifts
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = rewards[i] - rewards[0];
  double mean = 0.0;
  for (double v : t) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : t) var += (v - mean) * (v - mean);
  var /= n;
  const double std_dev = std::sqrt(var);
  std::vector<double> adv(n, 0.0);
  if (std_dev < 1e-8) return adv;
  for (int i = 0; i < n; ++i) adv[i] = (t[i] - mean) / std_dev;
  return adv;
}

double prob_ratio(double logp_new, double logp_old) {
  return std::exp(std::clamp(logp_new - logp_old, -50.0, 50.0));
}

double clipped_surrogate(double rho, double adv, double delta) {
  const double clipped = std::clamp(rho, 1.0 - delta, 1.0 + delta);
  return std::min(rho * adv, clipped * adv);
}

double surrogate_logp_coeff(double rho, double adv, double delta) {
  const double clipped = std::clamp(rho, 1.0 - delta, 1.0 + delta);
  return rho * adv <= clipped * adv ? rho * adv : 0.0;
}

double lr_schedule(long step, long total_steps, double lr_start, double lr_end) {
  if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
  const double frac = static_cast<double>(std::clamp(step, 0L, total_steps)) / total_steps;
  return lr_start + (lr_end - lr_start) * frac;
}

double grpo_objective(const GroupRollout& group, const PolicyParams& params_new,
                      const PolicyParams& params_ref, const TrainConfig& cfg) {
  const int n = static_cast<int>(group.responses.size());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lpn = sequence_log_prob(params_new, group.ctx, group.responses[i]);
    const double rho = prob_ratio(lpn, group.old_log_probs[i]);
    double term = clipped_surrogate(rho, group.advantages[i], cfg.clip_range);
    if (cfg.kl_weight != 0.0) {
      term -= cfg.kl_weight *
              kl_penalty(params_new, params_ref, group.ctx, group.responses[i], cfg.kl_mode);
    }
    total += term;
  }
  return total / n;
}

double group_gradient(const GroupRollout& group, const PolicyParams& params_new,
                      const PolicyParams& params_ref, const TrainConfig& cfg,
                      std::span<double> grad, double* mean_kl, long* ratio_clamps) {
  const int n = static_cast<int>(group.responses.size());
  const int V = params_new.dims.vocab_size;
  const double inv_n = 1.0 / n;
  double objective = 0.0;
  double kl_sum = 0.0;
  long clamps = 0;
  std::vector<double> gz;

  for (int i = 0; i < n; ++i) {
    const auto& tokens = group.responses[i];
    const ForwardTrace tn = forward_trace(params_new, group.ctx, tokens);
    clamps += ratio_clamped(tn.seq_logp, group.old_log_probs[i]);
    const double rho = prob_ratio(tn.seq_logp, group.old_log_probs[i]);
    const double adv = group.advantages[i];
    objective += inv_n * clipped_surrogate(rho, adv, cfg.clip_range);

    // total per-position logit gradient: surrogate plus the KL penalty term
    double logp_coeff = inv_n * surrogate_logp_coeff(rho, adv, cfg.clip_range);
    double kl = 0.0;
    gz.assign(static_cast<size_t>(tn.len) * V, 0.0);

    if (cfg.kl_weight != 0.0 && cfg.kl_mode == KlMode::kExact) {
      const ForwardTrace tr = forward_trace(params_ref, group.ctx, tokens);
      const double w = -cfg.kl_weight * inv_n;
      for (int t = 0; t < tn.len; ++t) {
        const double* p = &tn.probs[static_cast<size_t>(t) * V];
        const double* lp = &tn.log_probs[static_cast<size_t>(t) * V];
        const double* lq = &tr.log_probs[static_cast<size_t>(t) * V];
        double kl_t = 0.0;
        for (int v = 0; v < V; ++v) kl_t += p[v] * (lp[v] - lq[v]);
        double* g = &gz[static_cast<size_t>(t) * V];
        for (int v = 0; v < V; ++v) g[v] = w * p[v] * (lp[v] - lq[v] - kl_t);
        kl += kl_t;
      }
    } else if (cfg.kl_weight != 0.0) {
      const double lpr = sequence_log_prob(params_ref, group.ctx, tokens);
      const double r = std::exp(std::clamp(lpr - tn.seq_logp, -50.0, 50.0));
      kl = r - std::log(r) - 1.0;
      logp_coeff -= cfg.kl_weight * inv_n * (1.0 - r);
    }

    if (logp_coeff != 0.0) {
      for (int t = 0; t < tn.len; ++t) {
        const double* p = &tn.probs[static_cast<size_t>(t) * V];
        double* g = &gz[static_cast<size_t>(t) * V];
        for (int v = 0; v < V; ++v) g[v] -= logp_coeff * p[v];
        g[tokens[t]] += logp_coeff;
      }
    }
    backward_from_logits(params_new, group.ctx, tokens, tn, gz, grad);

    objective -= cfg.kl_weight * inv_n * kl;
    kl_sum += kl;
  }
  if (mean_kl) *mean_kl = kl_sum / n;
  if (ratio_clamps) *ratio_clamps = clamps;
  return objective;
}

namespace {

struct ParamView {
  double* data;
  std::size_t size;
};

std::array<ParamView, 5> param_views(PolicyParams& p) {
  return {ParamView{p.enc_w.data(), p.enc_w.size()}, ParamView{p.enc_b.data(), p.enc_b.size()},
          ParamView{p.emb.data(), p.emb.size()}, ParamView{p.head_w.data(), p.head_w.size()},
          ParamView{p.head_b.data(), p.head_b.size()}};
}

// AdamW ascent step: moments track the loss gradient (-grad_objective),
// decay applies directly to the parameters.
void adamw_update(PolicyParams& params, OptimizerState& opt, std::span<const double> grad_obj,
                  double lr) {
  ++opt.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  std::size_t k = 0;
  for (ParamView view : param_views(params)) {
    for (std::size_t i = 0; i < view.size; ++i, ++k) {
      const double g = -grad_obj[k];
      opt.m[k] = opt.beta1 * opt.m[k] + (1.0 - opt.beta1) * g;
      opt.v[k] = opt.beta2 * opt.v[k] + (1.0 - opt.beta2) * g * g;
      const double mh = opt.m[k] / bc1;
      const double vh = opt.v[k] / bc2;
      view.data[i] -= lr * mh / (std::sqrt(vh) + opt.eps);
      view.data[i] -= lr * opt.weight_decay * view.data[i];
    }
  }
}

}  // namespace

StepOutcome grpo_step(PolicyParams& params, OptimizerState& opt,
                      std::span<const GroupRollout> groups, const PolicyParams& params_ref,
                      const TrainConfig& cfg, long step_index, long total_steps, ExecMode mode,
                      StepWorkspace* ws) {
  if (groups.empty()) throw ConfigError("grpo_step needs a non-empty batch");
  const std::size_t P = ParamLayout(params.dims).total;
  const int G = static_cast<int>(groups.size());

  StepWorkspace local;
  if (!ws) ws = &local;
  ws->group_grads.assign(static_cast<size_t>(G) * P, 0.0);
  ws->grad.assign(P, 0.0);
  ws->group_objective.assign(G, 0.0);
  ws->group_kl.assign(G, 0.0);
  ws->group_clamps.assign(G, 0);

  int failed_group = -1;
  std::exception_ptr error;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (mode == ExecMode::kParallel)
#endif
  for (int g = 0; g < G; ++g) {
    try {
      std::span<double> grad(&ws->group_grads[static_cast<size_t>(g) * P], P);
      ws->group_objective[g] = group_gradient(groups[g], params, params_ref, cfg, grad,
                                              &ws->group_kl[g], &ws->group_clamps[g]);
      for (double v : grad) {
        if (!std::isfinite(v)) {
#ifdef _OPENMP
#pragma omp critical
#endif
          failed_group = g;
          break;
        }
      }
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      {
        if (!error) error = std::current_exception();
        failed_group = g;
      }
    }
  }
  (void)mode;
  if (error) std::rethrow_exception(error);
  if (failed_group >= 0) {
    const auto& bad = groups[failed_group];
    throw DivergenceError("non-finite gradient in group " + std::to_string(failed_group) +
                          " (sample " + bad.sample_id + ", task " +
                          std::string(task_name(bad.task)) + ")");
  }

  // fixed-order reduction keeps results identical across thread counts
  StepOutcome out;
  const double inv_g = 1.0 / G;
  for (int g = 0; g < G; ++g) {
    const double* src = &ws->group_grads[static_cast<size_t>(g) * P];
    for (std::size_t k = 0; k < P; ++k) ws->grad[k] += src[k];
    out.objective += ws->group_objective[g];
    out.mean_kl += ws->group_kl[g];
    out.ratio_clamps += ws->group_clamps[g];
  }
  for (std::size_t k = 0; k < P; ++k) ws->grad[k] *= inv_g;
  out.objective *= inv_g;
  out.mean_kl *= inv_g;

  adamw_update(params, opt, ws->grad, lr_schedule(step_index, total_steps, cfg.lr_start, cfg.lr_end));
  return out;
}

}  // namespace gql
