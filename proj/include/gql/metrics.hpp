#ifndef GQL_METRICS_HPP_
#define GQL_METRICS_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gql/types.hpp"

namespace gql {

// Pearson linear correlation. nullopt when either input has zero variance
// (the metric is undefined there, never silently 0).
std::optional<double> plcc(std::span<const double> x, std::span<const double> y);

// Spearman rank-order correlation: Pearson on average ranks (ties receive
// the mean of the rank positions they occupy).
std::optional<double> srcc(std::span<const double> x, std::span<const double> y);

std::vector<double> average_ranks(std::span<const double> x);

// A degradation prediction; nullopt marks a parse failure (counted wrong).
using ClassLevelPred = std::optional<DegTruth>;

struct PerClassAccuracy {
  DegradationClass cls = DegradationClass::kNull;
  int n = 0;
  double deg_acc = 0.0;
  std::optional<double> lev_acc;  // absent for the null class
};

struct MetricReport {
  int n = 0;
  int n_score = 0;
  int n_degradation = 0;
  int n_comparison = 0;
  int parse_failures = 0;
  std::optional<double> plcc;
  std::optional<double> srcc;
  std::optional<double> deg_acc;
  std::optional<double> lev_acc;  // aggregated over non-null ground truths
  std::optional<double> comp_acc;
  std::optional<double> scr_hit_rate;  // |pred - gt| < epsilon
  std::vector<PerClassAccuracy> per_class;

  std::string to_json() const;
  static std::string csv_header();
  std::string to_csv_row() const;
};

// deg_acc over everything, lev_acc over non-null ground truths, per-class
// rows over ground-truth class subsets.
MetricReport class_level_accuracy(std::span<const ClassLevelPred> preds,
                                  std::span<const DegTruth> gts);

}  // namespace gql

#endif  // GQL_METRICS_HPP_
