#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace gql::oracle {

RewardBreakdown score_prediction(const PredSummary& pred, const GroundTruth& truth,
                                 TaskKind task, const RewardConfig& cfg) {
  RewardBreakdown b;
  if (pred.format_ok) b.r_fmt = 1.0;

  if (task == TaskKind::kScore) {
    const double gt = std::get<MosTruth>(truth).mos;
    if (pred.payload_ok && std::isfinite(pred.rating) && std::isfinite(gt)) {
      if (cfg.score_threshold == 0.0) {
        if (pred.rating == gt) b.r_scr = 1.0;
      } else if (std::fabs(pred.rating - gt) < cfg.score_threshold) {
        b.r_scr = 1.0;
      }
    }
    b.total = b.r_fmt + b.r_scr;
  } else if (task == TaskKind::kDegradation) {
    const auto gt = std::get<DegTruth>(truth);
    if (pred.payload_ok) {
      if (pred.cls == gt.cls) b.r_deg = 1.0;
      if (pred.cls == gt.cls && pred.sev == gt.sev) b.r_lev = 1.0;
    }
    b.total = b.r_fmt + cfg.alpha1 * b.r_deg + cfg.alpha2 * b.r_lev;
  } else {
    const auto gt = std::get<CompTruth>(truth);
    if (pred.payload_ok && pred.choice == gt.better) b.r_comp = 1.0;
    b.total = b.r_fmt + b.r_comp;
  }
  return b;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const int n = static_cast<int>(x.size());
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) mx += x[i];
  for (int i = 0; i < n; ++i) my += y[i];
  mx /= n;
  my /= n;
  double num = 0.0, dx2 = 0.0, dy2 = 0.0;
  for (int i = 0; i < n; ++i) {
    num += (x[i] - mx) * (y[i] - my);
    dx2 += (x[i] - mx) * (x[i] - mx);
    dy2 += (y[i] - my) * (y[i] - my);
  }
  if (dx2 == 0.0 || dy2 == 0.0) return std::nullopt;
  return num / (std::sqrt(dx2) * std::sqrt(dy2));
}

namespace {

std::vector<double> ranks_of(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return x[a] < x[b]; });
  std::vector<double> r(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    double sum = 0.0;
    for (int k = i; k <= j; ++k) sum += k + 1;
    const double avg = sum / (j - i + 1);
    for (int k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = ranks_of(x);
  const auto ry = ranks_of(y);
  return pearson(rx, ry);
}

std::vector<double> finite_difference_grad(const PolicyParams& params,
                                           const std::function<double(const PolicyParams&)>& f,
                                           double h) {
  PolicyParams p = params;
  std::vector<double>* arrays[] = {&p.enc_w, &p.enc_b, &p.emb, &p.head_w, &p.head_b};
  std::vector<double> grad;
  grad.reserve(p.param_count());
  for (auto* arr : arrays) {
    for (auto& v : *arr) {
      const double keep = v;
      v = keep + h;
      const double up = f(p);
      v = keep - h;
      const double dn = f(p);
      v = keep;
      grad.push_back((up - dn) / (2.0 * h));
    }
  }
  return grad;
}

double kl_exact_brute(const PolicyParams& pnew, const PolicyParams& pref,
                      std::span<const double> ctx, std::span<const int> tokens) {
  const auto softmax_rows = [&](const PolicyParams& p) {
    // naive recomputation: encoder, prefix means, logits, exp/normalize
    const int H = p.dims.hidden_dim, F = p.dims.context_dim, E = p.dims.embed_dim,
              V = p.dims.vocab_size, D = p.dims.head_in();
    std::vector<double> enc(H, 0.0);
    for (int h = 0; h < H; ++h) {
      enc[h] = p.enc_b[h];
      for (int f = 0; f < F; ++f) enc[h] += p.enc_w[h * F + f] * ctx[f];
    }
    std::vector<std::vector<double>> rows;
    for (size_t t = 0; t < tokens.size(); ++t) {
      std::vector<double> x(D, 0.0);
      for (int h = 0; h < H; ++h) x[h] = enc[h];
      for (size_t j = 0; j < t; ++j) {
        for (int e = 0; e < E; ++e) x[H + e] += p.emb[tokens[j] * E + e] / static_cast<double>(t);
      }
      std::vector<double> probs(V, 0.0);
      double z = 0.0;
      for (int v = 0; v < V; ++v) {
        double logit = p.head_b[t * V + v];
        for (int d = 0; d < D; ++d) logit += p.head_w[(t * V + v) * D + d] * x[d];
        probs[v] = std::exp(logit);
        z += probs[v];
      }
      for (auto& q : probs) q /= z;
      rows.push_back(std::move(probs));
    }
    return rows;
  };

  const auto rows_new = softmax_rows(pnew);
  const auto rows_ref = softmax_rows(pref);
  double kl = 0.0;
  for (size_t t = 0; t < tokens.size(); ++t) {
    for (int v = 0; v < pnew.dims.vocab_size; ++v) {
      kl += rows_new[t][v] * std::log(rows_new[t][v] / rows_ref[t][v]);
    }
  }
  return kl;
}

double max_rel_err(std::span<const double> a, std::span<const double> b, double floor) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({floor, std::fabs(a[i]), std::fabs(b[i])});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
  }
  return worst;
}

double uniform_rating_hit_rate(std::span<const double> gts, double epsilon) {
  double acc = 0.0;
  for (double g : gts) {
    const double lo = std::max(g - epsilon, 1.0);
    const double hi = std::min(g + epsilon, 5.0);
    acc += std::max(0.0, hi - lo) / 4.0;
  }
  return acc / static_cast<double>(gts.size());
}

}  // namespace gql::oracle
