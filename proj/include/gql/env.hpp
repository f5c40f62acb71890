#ifndef GQL_ENV_HPP_
#define GQL_ENV_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gql/rng.hpp"
#include "gql/types.hpp"

namespace gql {

// Hidden state behind one synthetic image: a scalar content quality plus a
// degradation class and severity. Everything observable is derived from it.
struct Latent {
  double content_quality = 0.0;
  DegradationClass cls = DegradationClass::kNull;
  SeverityLevel sev = SeverityLevel::kNone;
};

struct SyntheticSample {
  std::string id;
  TaskKind task = TaskKind::kScore;
  std::vector<double> features;
  std::vector<double> features_b;  // comparison tasks only
  std::optional<Latent> latent;    // absent when loaded from disk
  std::optional<Latent> latent_b;
  GroundTruth truth;
};

struct EnvConfig {
  int feature_dim = 16;
  double feature_noise_scale = 0.05;
  std::array<double, kNumClasses> class_priors{0.2, 0.2, 0.2, 0.2, 0.2};
  std::array<double, 5> severity_priors{0.2, 0.2, 0.2, 0.2, 0.2};
  // Range of the undegraded MOS; the latent content quality is drawn so
  // that 1 + 4*sigmoid(cq) spans exactly this interval.
  std::array<double, 2> mos_base_range{1.5, 4.5};
  double comparison_margin = 0.25;
  // Affine normalization constants applied by the context encoder.
  double feature_loc = 0.0;
  double feature_scale = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
  std::array<double, 2> content_quality_range() const;
};

struct DatasetCounts {
  int score = 0;
  int degradation = 0;
  int comparison = 0;
};

// MOS = clamp(1 + 4*sigmoid(content_quality) - 0.55*severity_rank, 1, 5);
// the penalty applies only to non-null classes. Non-increasing in severity.
double mos_oracle(const Latent& latent);

// The fixed full-rank linear map from latent coordinates to feature space
// (orthonormal columns, independent of any config seed).
std::vector<double> latent_embedding(const Latent& latent, int feature_dim);

// Least-squares inversion of latent_embedding; exact when feature noise is 0.
Latent probe_latent(const std::vector<double>& features);

// One sample for a score or degradation task. Draw order is fixed, so a
// fixed rng state reproduces the sample bit-exactly.
SyntheticSample gen_sample(Rng& rng, TaskKind task, const EnvConfig& cfg, std::string id = {});

// A pair sharing content quality but with independent degradations; the
// label compares the two oracle MOS values against the config margin.
SyntheticSample gen_comparison(Rng& rng, const EnvConfig& cfg, std::string id = {});

struct DatasetManifest {
  std::uint64_t seed = 0;
  DatasetCounts counts;
  EnvConfig env_config;
  int schema_version = 1;
  std::string checksum;  // FNV-1a over the three data files
};

// Writes score.jsonl / degradation.jsonl / comparison.jsonl plus
// manifest.json into out_dir; rerunning with the same config reproduces
// identical bytes.
DatasetManifest make_dataset(const EnvConfig& cfg, const DatasetCounts& counts,
                             const std::filesystem::path& out_dir);

std::vector<SyntheticSample> load_dataset_file(const std::filesystem::path& path,
                                               int* malformed_lines = nullptr);

std::uint64_t fnv1a_file(const std::filesystem::path& path, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace gql

#endif  // GQL_ENV_HPP_
