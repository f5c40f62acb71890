#include "gql/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"

namespace gql {

std::optional<double> plcc(std::span<const double> x, std::span<const double> y) {
  const int n = static_cast<int>(x.size());
  if (n != static_cast<int>(y.size())) throw ConfigError("plcc inputs differ in length");
  if (n < 2) throw ConfigError("plcc needs at least 2 points");
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x[a] < x[b]; });
  std::vector<double> ranks(n, 0.0);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;  // ranks are 1-based
    for (int k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> srcc(std::span<const double> x, std::span<const double> y) {
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  return plcc(rx, ry);
}

MetricReport class_level_accuracy(std::span<const ClassLevelPred> preds,
                                  std::span<const DegTruth> gts) {
  const int n = static_cast<int>(preds.size());
  if (n != static_cast<int>(gts.size())) throw ConfigError("prediction/label length mismatch");
  if (n < 1) throw ConfigError("class_level_accuracy needs at least one pair");

  MetricReport rep;
  rep.n = n;
  rep.n_degradation = n;
  int deg_hits = 0, lev_hits = 0, non_null = 0;
  std::array<int, kNumClasses> cls_n{}, cls_deg{}, cls_lev{};
  for (int i = 0; i < n; ++i) {
    const DegTruth& gt = gts[i];
    const int c = static_cast<int>(gt.cls);
    const bool deg_ok = preds[i] && preds[i]->cls == gt.cls;
    const bool lev_ok = deg_ok && preds[i]->sev == gt.sev;
    ++cls_n[c];
    cls_deg[c] += deg_ok;
    cls_lev[c] += lev_ok;
    deg_hits += deg_ok;
    if (gt.cls != DegradationClass::kNull) {
      ++non_null;
      lev_hits += lev_ok;
    }
    rep.parse_failures += !preds[i].has_value();
  }
  rep.deg_acc = static_cast<double>(deg_hits) / n;
  if (non_null > 0) rep.lev_acc = static_cast<double>(lev_hits) / non_null;
  for (int c = 0; c < kNumClasses; ++c) {
    if (cls_n[c] == 0) continue;
    PerClassAccuracy pc;
    pc.cls = static_cast<DegradationClass>(c);
    pc.n = cls_n[c];
    pc.deg_acc = static_cast<double>(cls_deg[c]) / cls_n[c];
    if (pc.cls != DegradationClass::kNull) {
      pc.lev_acc = static_cast<double>(cls_lev[c]) / cls_n[c];
    }
    rep.per_class.push_back(pc);
  }
  return rep;
}

namespace {

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

std::string opt_csv(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j{
      {"n", n},
      {"n_score", n_score},
      {"n_degradation", n_degradation},
      {"n_comparison", n_comparison},
      {"parse_failures", parse_failures},
      {"plcc", opt_json(plcc)},
      {"srcc", opt_json(srcc)},
      {"deg_acc", opt_json(deg_acc)},
      {"lev_acc", opt_json(lev_acc)},
      {"comp_acc", opt_json(comp_acc)},
      {"scr_hit_rate", opt_json(scr_hit_rate)},
  };
  auto& pc = j["per_class"];
  pc = nlohmann::ordered_json::array();
  for (const auto& row : per_class) {
    pc.push_back(nlohmann::ordered_json{{"class", class_name(row.cls)},
                                        {"n", row.n},
                                        {"deg_acc", row.deg_acc},
                                        {"lev_acc", opt_json(row.lev_acc)}});
  }
  return j.dump();
}

std::string MetricReport::csv_header() {
  return "n,n_score,n_degradation,n_comparison,parse_failures,plcc,srcc,deg_acc,lev_acc,"
         "comp_acc,scr_hit_rate";
}

std::string MetricReport::to_csv_row() const {
  std::string out = std::to_string(n) + "," + std::to_string(n_score) + "," +
                    std::to_string(n_degradation) + "," + std::to_string(n_comparison) + "," +
                    std::to_string(parse_failures);
  for (const auto& v : {plcc, srcc, deg_acc, lev_acc, comp_acc, scr_hit_rate}) {
    out += "," + opt_csv(v);
  }
  return out;
}

}  // namespace gql
