#include "gql/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace gql {
namespace {

constexpr int kLatentDim = 6;  // content quality + one slot per class

// Latent coordinates: [cq, noise, blur, jpeg, darken, null] where the active
// class slot holds the severity rank (the null slot holds 1).
std::array<double, kLatentDim> latent_coords(const Latent& l) {
  std::array<double, kLatentDim> c{};
  c[0] = l.content_quality;
  if (l.cls == DegradationClass::kNull) {
    c[1 + static_cast<int>(DegradationClass::kNull)] = 1.0;
  } else {
    c[1 + static_cast<int>(l.cls)] = static_cast<double>(severity_rank(l.sev));
  }
  return c;
}

// Orthonormal feature basis, fixed once for all configs of a given
// feature_dim: pseudo-random columns pushed through Gram-Schmidt.
std::vector<double> embedding_basis(int feature_dim) {
  if (feature_dim < kLatentDim) throw ConfigError("feature_dim must be >= 6");
  std::vector<double> m(static_cast<size_t>(feature_dim) * kLatentDim);
  std::uint64_t x = 0x5EEDBA5E0FEA70FFULL;
  for (auto& v : m) {
    v = static_cast<double>(Rng::splitmix64(x) >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  }
  for (int j = 0; j < kLatentDim; ++j) {
    for (int k = 0; k < j; ++k) {
      double dot = 0.0;
      for (int i = 0; i < feature_dim; ++i) dot += m[i * kLatentDim + j] * m[i * kLatentDim + k];
      for (int i = 0; i < feature_dim; ++i) m[i * kLatentDim + j] -= dot * m[i * kLatentDim + k];
    }
    double norm = 0.0;
    for (int i = 0; i < feature_dim; ++i) {
      norm += m[i * kLatentDim + j] * m[i * kLatentDim + j];
    }
    norm = std::sqrt(norm);
    if (norm < 1e-9) throw ConfigError("degenerate embedding basis");
    for (int i = 0; i < feature_dim; ++i) m[i * kLatentDim + j] /= norm;
  }
  return m;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

Latent draw_latent(Rng& rng, const EnvConfig& cfg) {
  Latent l;
  l.cls = static_cast<DegradationClass>(rng.categorical(cfg.class_priors));
  l.sev = l.cls == DegradationClass::kNull
              ? SeverityLevel::kNone
              : static_cast<SeverityLevel>(rng.categorical(cfg.severity_priors));
  const auto range = cfg.content_quality_range();
  l.content_quality = rng.uniform(range[0], range[1]);
  return l;
}

std::vector<double> noisy_features(Rng& rng, const Latent& l, const EnvConfig& cfg) {
  std::vector<double> f = latent_embedding(l, cfg.feature_dim);
  if (cfg.feature_noise_scale > 0.0) {
    for (auto& v : f) v += rng.uniform(-cfg.feature_noise_scale, cfg.feature_noise_scale);
  }
  return f;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

nlohmann::ordered_json env_config_json(const EnvConfig& cfg) {
  return nlohmann::ordered_json{
      {"feature_dim", cfg.feature_dim},
      {"feature_noise_scale", cfg.feature_noise_scale},
      {"class_priors", cfg.class_priors},
      {"severity_priors", cfg.severity_priors},
      {"mos_base_range", cfg.mos_base_range},
      {"comparison_margin", cfg.comparison_margin},
      {"feature_loc", cfg.feature_loc},
      {"feature_scale", cfg.feature_scale},
      {"seed", cfg.seed},
  };
}

nlohmann::ordered_json sample_json(const SyntheticSample& s) {
  nlohmann::ordered_json j{{"id", s.id}, {"task", task_name(s.task)}, {"features", s.features}};
  switch (s.task) {
    case TaskKind::kScore:
      j["mos"] = std::get<MosTruth>(s.truth).mos;
      break;
    case TaskKind::kDegradation:
      j["class"] = class_name(std::get<DegTruth>(s.truth).cls);
      j["severity"] = severity_name(std::get<DegTruth>(s.truth).sev);
      break;
    case TaskKind::kComparison: {
      j["features_b"] = s.features_b;
      const Choice c = std::get<CompTruth>(s.truth).better;
      j["better"] = c == Choice::kA ? "A" : (c == Choice::kB ? "B" : "similar");
      break;
    }
  }
  return j;
}

}  // namespace

void EnvConfig::validate() const {
  if (feature_dim < kLatentDim) throw ConfigError("feature_dim must be >= 6");
  if (feature_noise_scale < 0.0) throw ConfigError("feature_noise_scale must be >= 0");
  double s = 0.0;
  for (double p : class_priors) {
    if (p < 0.0) throw ConfigError("class priors must be non-negative");
    s += p;
  }
  if (std::fabs(s - 1.0) > 1e-9) throw ConfigError("class priors must sum to 1");
  s = 0.0;
  for (double p : severity_priors) {
    if (p < 0.0) throw ConfigError("severity priors must be non-negative");
    s += p;
  }
  if (std::fabs(s - 1.0) > 1e-9) throw ConfigError("severity priors must sum to 1");
  if (!(mos_base_range[0] > 1.0 && mos_base_range[1] < 5.0 &&
        mos_base_range[0] < mos_base_range[1])) {
    throw ConfigError("mos_base_range must be an increasing interval inside (1, 5)");
  }
  if (comparison_margin < 0.0) throw ConfigError("comparison_margin must be >= 0");
  if (feature_scale <= 0.0) throw ConfigError("feature_scale must be > 0");
}

std::array<double, 2> EnvConfig::content_quality_range() const {
  return {logit((mos_base_range[0] - 1.0) / 4.0), logit((mos_base_range[1] - 1.0) / 4.0)};
}

double mos_oracle(const Latent& latent) {
  const double base = 1.0 + 4.0 * sigmoid(latent.content_quality);
  const double penalty =
      latent.cls == DegradationClass::kNull ? 0.0 : 0.55 * severity_rank(latent.sev);
  return std::clamp(base - penalty, 1.0, 5.0);
}

std::vector<double> latent_embedding(const Latent& latent, int feature_dim) {
  const std::vector<double> m = embedding_basis(feature_dim);
  const auto c = latent_coords(latent);
  std::vector<double> f(feature_dim, 0.0);
  for (int i = 0; i < feature_dim; ++i) {
    for (int j = 0; j < kLatentDim; ++j) f[i] += m[i * kLatentDim + j] * c[j];
  }
  return f;
}

Latent probe_latent(const std::vector<double>& features) {
  const int feature_dim = static_cast<int>(features.size());
  const std::vector<double> m = embedding_basis(feature_dim);
  std::array<double, kLatentDim> c{};
  for (int j = 0; j < kLatentDim; ++j) {
    for (int i = 0; i < feature_dim; ++i) c[j] += m[i * kLatentDim + j] * features[i];
  }
  Latent l;
  l.content_quality = c[0];
  int best = 0;
  for (int k = 1; k < kNumClasses; ++k) {
    if (c[1 + k] > c[1 + best]) best = k;
  }
  if (c[1 + best] < 0.5) best = static_cast<int>(DegradationClass::kNull);
  l.cls = static_cast<DegradationClass>(best);
  if (l.cls == DegradationClass::kNull) {
    l.sev = SeverityLevel::kNone;
  } else {
    const int rank = std::clamp(static_cast<int>(std::lround(c[1 + best])), 1, 5);
    l.sev = static_cast<SeverityLevel>(rank - 1);
  }
  return l;
}

SyntheticSample gen_sample(Rng& rng, TaskKind task, const EnvConfig& cfg, std::string id) {
  if (task == TaskKind::kComparison) return gen_comparison(rng, cfg, std::move(id));
  SyntheticSample s;
  s.id = std::move(id);
  s.task = task;
  const Latent l = draw_latent(rng, cfg);
  s.latent = l;
  s.features = noisy_features(rng, l, cfg);
  if (task == TaskKind::kScore) {
    s.truth = MosTruth{round2(mos_oracle(l))};
  } else {
    s.truth = DegTruth{l.cls, l.sev};
  }
  return s;
}

SyntheticSample gen_comparison(Rng& rng, const EnvConfig& cfg, std::string id) {
  SyntheticSample s;
  s.id = std::move(id);
  s.task = TaskKind::kComparison;
  Latent a = draw_latent(rng, cfg);
  Latent b = draw_latent(rng, cfg);
  b.content_quality = a.content_quality;
  s.latent = a;
  s.latent_b = b;
  s.features = noisy_features(rng, a, cfg);
  s.features_b = noisy_features(rng, b, cfg);
  const double diff = mos_oracle(a) - mos_oracle(b);
  Choice better = Choice::kSimilar;
  if (diff > cfg.comparison_margin) better = Choice::kA;
  if (diff < -cfg.comparison_margin) better = Choice::kB;
  s.truth = CompTruth{better};
  return s;
}

DatasetManifest make_dataset(const EnvConfig& cfg, const DatasetCounts& counts,
                             const std::filesystem::path& out_dir) {
  cfg.validate();
  if (counts.score < 0 || counts.degradation < 0 || counts.comparison < 0) {
    throw ConfigError("dataset counts must be >= 0");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);

  const Rng root(cfg.seed);
  const auto write_file = [&](const char* name, TaskKind task, int count, const char* prefix,
                              std::uint64_t stream) {
    const auto path = out_dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string());
    Rng rng = root.derive(stream);
    char idbuf[32];
    for (int i = 0; i < count; ++i) {
      std::snprintf(idbuf, sizeof idbuf, "%s-%06d", prefix, i);
      const SyntheticSample s = task == TaskKind::kComparison
                                    ? gen_comparison(rng, cfg, idbuf)
                                    : gen_sample(rng, task, cfg, idbuf);
      out << sample_json(s).dump() << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
  };
  write_file("score.jsonl", TaskKind::kScore, counts.score, "scr", 0);
  write_file("degradation.jsonl", TaskKind::kDegradation, counts.degradation, "deg", 1);
  write_file("comparison.jsonl", TaskKind::kComparison, counts.comparison, "cmp", 2);

  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* name : {"score.jsonl", "degradation.jsonl", "comparison.jsonl"}) {
    h = fnv1a_file(out_dir / name, h);
  }
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));

  DatasetManifest manifest;
  manifest.seed = cfg.seed;
  manifest.counts = counts;
  manifest.env_config = cfg;
  manifest.checksum = hex;

  nlohmann::ordered_json j{
      {"schema_version", manifest.schema_version},
      {"seed", manifest.seed},
      {"counts",
       {{"score", counts.score}, {"degradation", counts.degradation}, {"comparison", counts.comparison}}},
      {"env_config", env_config_json(cfg)},
      {"checksum", manifest.checksum},
  };
  std::ofstream mf(out_dir / "manifest.json", std::ios::binary);
  if (!mf) throw IoError("cannot open " + (out_dir / "manifest.json").string());
  mf << j.dump(2) << '\n';
  return manifest;
}

std::vector<SyntheticSample> load_dataset_file(const std::filesystem::path& path,
                                               int* malformed_lines) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::vector<SyntheticSample> out;
  int bad = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      ++bad;
      continue;
    }
    try {
      SyntheticSample s;
      s.id = j.at("id").get<std::string>();
      const auto task = parse_task(j.at("task").get<std::string>());
      if (!task) throw std::runtime_error("bad task");
      s.task = *task;
      s.features = j.at("features").get<std::vector<double>>();
      switch (s.task) {
        case TaskKind::kScore:
          s.truth = MosTruth{j.at("mos").get<double>()};
          break;
        case TaskKind::kDegradation: {
          const auto cls = parse_class(j.at("class").get<std::string>());
          const auto sev = parse_severity(j.at("severity").get<std::string>());
          if (!cls || !sev || !valid_class_severity(*cls, *sev)) {
            throw std::runtime_error("bad label");
          }
          s.truth = DegTruth{*cls, *sev};
          break;
        }
        case TaskKind::kComparison: {
          s.features_b = j.at("features_b").get<std::vector<double>>();
          const std::string b = to_lower(j.at("better").get<std::string>());
          if (b == "a") {
            s.truth = CompTruth{Choice::kA};
          } else if (b == "b") {
            s.truth = CompTruth{Choice::kB};
          } else if (b == "similar") {
            s.truth = CompTruth{Choice::kSimilar};
          } else {
            throw std::runtime_error("bad label");
          }
          break;
        }
      }
      out.push_back(std::move(s));
    } catch (const std::exception&) {
      ++bad;
    }
  }
  if (malformed_lines) *malformed_lines = bad;
  return out;
}

std::uint64_t fnv1a_file(const std::filesystem::path& path, std::uint64_t h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace gql
