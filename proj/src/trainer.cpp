#include "gql/trainer.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gql {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

json opt_field(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

// ---- config ----

void parse_task_mix(const json& j, TaskMix& mix) {
  mix = {0.0, 0.0, 0.0};  // unspecified tasks get weight zero
  for (const auto& [key, value] : j.items()) {
    if (key == "score") {
      mix.score = value.get<double>();
    } else if (key == "degradation") {
      mix.degradation = value.get<double>();
    } else if (key == "comparison") {
      mix.comparison = value.get<double>();
    } else {
      throw ConfigError("unknown task_mix key: " + key);
    }
  }
}

template <typename T, std::size_t N>
std::array<T, N> fixed_array(const json& j, const char* what) {
  const auto v = j.get<std::vector<T>>();
  if (v.size() != N) throw ConfigError(std::string(what) + " must have " + std::to_string(N) + " entries");
  std::array<T, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "group_size") {
        cfg.train.group_size = value.get<int>();
      } else if (key == "kl_weight") {
        cfg.train.kl_weight = value.get<double>();
      } else if (key == "clip_range") {
        cfg.train.clip_range = value.get<double>();
      } else if (key == "score_threshold") {
        cfg.train.reward.score_threshold = value.get<double>();
      } else if (key == "alpha1") {
        cfg.train.reward.alpha1 = value.get<double>();
      } else if (key == "alpha2") {
        cfg.train.reward.alpha2 = value.get<double>();
      } else if (key == "lr_start") {
        cfg.train.lr_start = value.get<double>();
      } else if (key == "lr_end") {
        cfg.train.lr_end = value.get<double>();
      } else if (key == "epochs") {
        cfg.train.epochs = value.get<int>();
      } else if (key == "batch_size") {
        cfg.train.batch_size = value.get<int>();
      } else if (key == "kl_mode") {
        const std::string mode = to_lower(value.get<std::string>());
        if (mode == "exact") {
          cfg.train.kl_mode = KlMode::kExact;
        } else if (mode == "k3") {
          cfg.train.kl_mode = KlMode::kK3;
        } else {
          throw ConfigError("kl_mode must be \"exact\" or \"k3\"");
        }
      } else if (key == "seed") {
        cfg.train.seed = value.get<std::uint64_t>();
      } else if (key == "inner_steps") {
        cfg.train.inner_steps = value.get<int>();
      } else if (key == "feature_dim") {
        cfg.env.feature_dim = value.get<int>();
      } else if (key == "feature_noise_scale") {
        cfg.env.feature_noise_scale = value.get<double>();
      } else if (key == "class_priors") {
        cfg.env.class_priors = fixed_array<double, 5>(value, "class_priors");
      } else if (key == "severity_priors") {
        cfg.env.severity_priors = fixed_array<double, 5>(value, "severity_priors");
      } else if (key == "mos_base_range") {
        cfg.env.mos_base_range = fixed_array<double, 2>(value, "mos_base_range");
      } else if (key == "comparison_margin") {
        cfg.env.comparison_margin = value.get<double>();
      } else if (key == "feature_loc") {
        cfg.env.feature_loc = value.get<double>();
      } else if (key == "feature_scale") {
        cfg.env.feature_scale = value.get<double>();
      } else if (key == "hidden_dim") {
        cfg.hidden_dim = value.get<int>();
      } else if (key == "embed_dim") {
        cfg.embed_dim = value.get<int>();
      } else if (key == "max_len") {
        cfg.max_len = value.get<int>();
      } else if (key == "init_scale") {
        cfg.init_scale = value.get<double>();
      } else if (key == "task_mix") {
        parse_task_mix(value, cfg.task_mix);
      } else if (key == "steps_per_epoch") {
        cfg.steps_per_epoch = value.get<int>();
      } else if (key == "log_dir") {
        cfg.log_dir = value.get<std::string>();
      } else if (key == "dataset") {
        cfg.dataset = value.get<std::string>();
      } else if (key == "eval_every") {
        cfg.eval_every = value.get<int>();
      } else if (key == "eval_samples") {
        cfg.eval_samples = value.get<int>();
      } else if (key == "checkpoint_every") {
        cfg.checkpoint_every = value.get<int>();
      } else if (key == "threads") {
        cfg.threads = value.get<int>();
      } else if (key == "ref_mode") {
        cfg.ref_mode = value.get<std::string>();
      } else if (key == "init_checkpoint") {
        cfg.init_checkpoint = value.get<std::string>();
      } else if (key == "debug_dump_rollouts") {
        cfg.debug_dump_rollouts = value.get<bool>();
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } catch (const json::exception& e) {
      throw ConfigError("bad value for config key \"" + key + "\": " + e.what());
    }
  }

  if (const char* env_seed = std::getenv("GQL_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env_seed, &end, 10);
    if (end == env_seed || *end != '\0') throw ConfigError("GQL_SEED must be an unsigned integer");
    cfg.train.seed = v;
  }
  return cfg;
}

// ---- rollouts ----

GroupRollout build_rollout(const PolicyParams& old_params, SyntheticSample sample,
                           const EnvConfig& env, const TrainConfig& tc, Rng rng) {
  GroupRollout g;
  g.sample_id = sample.id;
  g.task = sample.task;
  g.truth = sample.truth;
  g.ctx = encode_context(sample, sample.task, env, old_params.dims.context_dim);

  std::vector<std::string> texts;
  texts.reserve(tc.group_size);
  for (int i = 0; i < tc.group_size; ++i) {
    SequenceSample seq = sample_sequence(old_params, g.ctx, rng);
    g.old_log_probs.push_back(seq.total_logp);
    texts.push_back(old_params.vocab.detokenize(seq.tokens));
    g.responses.push_back(std::move(seq.tokens));
  }
  g.breakdowns = evaluate_group(texts, g.truth, g.task, tc.reward);
  g.rewards.reserve(tc.group_size);
  for (const auto& b : g.breakdowns) g.rewards.push_back(b.total);
  g.advantages = normalize_advantages(g.rewards);
  return g;
}

struct BatchStats {
  double mean_total_reward = 0.0;
  double fmt_rate = 0.0;
  std::optional<double> scr_hit_rate;
  std::optional<double> deg_acc;
  std::optional<double> lev_acc;
};

BatchStats batch_stats(std::span<const GroupRollout> groups) {
  BatchStats s;
  double total_sum = 0.0, fmt_sum = 0.0, scr_sum = 0.0, deg_sum = 0.0, lev_sum = 0.0;
  int n = 0, n_scr = 0, n_deg = 0;
  for (const auto& g : groups) {
    for (const auto& b : g.breakdowns) {
      total_sum += b.total;
      fmt_sum += b.r_fmt;
      ++n;
      if (g.task == TaskKind::kScore) {
        scr_sum += b.r_scr;
        ++n_scr;
      } else if (g.task == TaskKind::kDegradation) {
        deg_sum += b.r_deg;
        lev_sum += b.r_lev;
        ++n_deg;
      }
    }
  }
  s.mean_total_reward = total_sum / n;
  s.fmt_rate = fmt_sum / n;
  if (n_scr > 0) s.scr_hit_rate = scr_sum / n_scr;
  if (n_deg > 0) {
    s.deg_acc = deg_sum / n_deg;
    s.lev_acc = lev_sum / n_deg;
  }
  return s;
}

TaskKind draw_task(Rng& rng, const TaskMix& mix) {
  const double total = mix.score + mix.degradation + mix.comparison;
  const double u = rng.uniform01() * total;
  if (u < mix.score) return TaskKind::kScore;
  if (u < mix.score + mix.degradation) return TaskKind::kDegradation;
  return TaskKind::kComparison;
}

std::string checkpoint_name(long step) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "ckpt_step_%06ld.json", step);
  return buf;
}

}  // namespace

PolicyDims RunConfig::policy_dims() const {
  PolicyDims d;
  d.context_dim = env.feature_dim + 4;
  d.hidden_dim = hidden_dim;
  d.embed_dim = embed_dim;
  d.max_len = max_len;
  d.vocab_size = 48;
  return d;
}

void RunConfig::validate() const {
  train.validate();
  env.validate();
  policy_dims().validate();
  if (init_scale <= 0.0) throw ConfigError("init_scale must be > 0");
  if (task_mix.score < 0.0 || task_mix.degradation < 0.0 || task_mix.comparison < 0.0 ||
      task_mix.score + task_mix.degradation + task_mix.comparison <= 0.0) {
    throw ConfigError("task_mix weights must be non-negative with a positive sum");
  }
  if (steps_per_epoch < 0) throw ConfigError("steps_per_epoch must be >= 0");
  if (steps_per_epoch == 0 && dataset.empty()) {
    throw ConfigError("steps_per_epoch 0 requires a dataset to derive it from");
  }
  if (eval_samples < 1) throw ConfigError("eval_samples must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (ref_mode != "init" && ref_mode != "format") {
    throw ConfigError("ref_mode must be \"init\" or \"format\"");
  }
}

RunConfig run_config_from_json_text(const std::string& text) {
  const auto j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config is not a JSON object");
  return parse_run_config(j);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json_text(ss.str());
}

std::vector<SyntheticSample> load_samples(const std::filesystem::path& path, int* malformed_lines) {
  int bad = 0;
  std::vector<SyntheticSample> all;
  if (std::filesystem::is_directory(path)) {
    for (const char* name : {"score.jsonl", "degradation.jsonl", "comparison.jsonl"}) {
      const auto f = path / name;
      if (!std::filesystem::exists(f)) continue;
      int b = 0;
      auto part = load_dataset_file(f, &b);
      bad += b;
      all.insert(all.end(), std::make_move_iterator(part.begin()),
                 std::make_move_iterator(part.end()));
    }
  } else {
    all = load_dataset_file(path, &bad);
  }
  if (malformed_lines) *malformed_lines = bad;
  return all;
}

TrainResult run_train(const RunConfig& cfg, const std::function<bool(const StepStats&)>& stop_cb) {
  cfg.validate();
  if (cfg.log_dir.empty()) throw ConfigError("log_dir is required for training");
  std::error_code ec;
  std::filesystem::create_directories(cfg.log_dir, ec);

  const Vocabulary vocab = make_default_vocab();
  const PolicyDims dims = cfg.policy_dims();
  const TrainConfig& tc = cfg.train;

  const Rng root(tc.seed);
  Rng env_rng = root.derive(0);
  std::uint64_t init_seed;
  {
    Rng r = root.derive(1);
    init_seed = r.next_u64();
  }

  PolicyParams params = cfg.init_checkpoint.empty()
                            ? init_policy(dims, vocab, init_seed, cfg.init_scale)
                            : load_checkpoint(cfg.init_checkpoint);
  if (params.dims.context_dim != dims.context_dim || params.dims.hidden_dim != dims.hidden_dim ||
      params.dims.embed_dim != dims.embed_dim || params.dims.max_len != dims.max_len ||
      params.dims.vocab_size != dims.vocab_size || !(params.vocab == vocab)) {
    throw ConfigError("init_checkpoint does not match the configured policy shape");
  }
  const PolicyParams params_ref =
      cfg.ref_mode == "format" ? make_format_reference(dims, vocab) : snapshot(params);
  OptimizerState opt(dims);

  // task pools when training from files
  std::vector<SyntheticSample> pool[3];
  if (!cfg.dataset.empty()) {
    auto samples = load_samples(cfg.dataset);
    for (auto& s : samples) pool[static_cast<int>(s.task)].push_back(std::move(s));
    const auto need = [&](double w, TaskKind t) {
      if (w > 0.0 && pool[static_cast<int>(t)].empty()) {
        throw ConfigError("task_mix requests " + std::string(task_name(t)) +
                          " but the dataset has no such samples");
      }
    };
    need(cfg.task_mix.score, TaskKind::kScore);
    need(cfg.task_mix.degradation, TaskKind::kDegradation);
    need(cfg.task_mix.comparison, TaskKind::kComparison);
  }
  long steps_per_epoch = cfg.steps_per_epoch;
  if (steps_per_epoch == 0) {
    const long total_samples = static_cast<long>(pool[0].size() + pool[1].size() + pool[2].size());
    steps_per_epoch = std::max(1L, (total_samples + tc.batch_size - 1) / tc.batch_size);
  }
  const long total_steps = static_cast<long>(tc.epochs) * steps_per_epoch;

#ifdef _OPENMP
  omp_set_num_threads(std::max(1, cfg.threads));
#endif
  const ExecMode mode = cfg.threads > 1 ? ExecMode::kParallel : ExecMode::kSerial;

  TrainResult result;
  result.log_path = cfg.log_dir / "train_log.jsonl";
  std::ofstream log(result.log_path, std::ios::binary);
  if (!log) throw IoError("cannot open log: " + result.log_path.string());

  const ordered_json header{
      {"type", "header"},
      {"group_size", tc.group_size},
      {"kl_weight", tc.kl_weight},
      {"clip_range", tc.clip_range},
      {"score_threshold", tc.reward.score_threshold},
      {"alpha1", tc.reward.alpha1},
      {"alpha2", tc.reward.alpha2},
      {"lr_start", tc.lr_start},
      {"lr_end", tc.lr_end},
      {"epochs", tc.epochs},
      {"batch_size", tc.batch_size},
      {"kl_mode", tc.kl_mode == KlMode::kExact ? "exact" : "k3"},
      {"seed", tc.seed},
      {"inner_steps", tc.inner_steps},
      {"steps_per_epoch", steps_per_epoch},
      {"total_steps", total_steps},
      {"feature_dim", cfg.env.feature_dim},
      {"feature_noise_scale", cfg.env.feature_noise_scale},
      {"hidden_dim", cfg.hidden_dim},
      {"embed_dim", cfg.embed_dim},
      {"max_len", cfg.max_len},
      {"init_scale", cfg.init_scale},
      {"task_mix",
       {{"score", cfg.task_mix.score},
        {"degradation", cfg.task_mix.degradation},
        {"comparison", cfg.task_mix.comparison}}},
      {"ref_mode", cfg.ref_mode},
      {"threads", cfg.threads},
  };
  log << header.dump() << '\n';

  std::ofstream dump;
  if (cfg.debug_dump_rollouts) {
    dump.open(cfg.log_dir / "rollouts.jsonl", std::ios::binary);
    if (!dump) throw IoError("cannot open rollout dump");
  }

  // held-out evaluation pool, one per active task
  std::vector<SyntheticSample> eval_pool;
  std::ofstream eval_log;
  if (cfg.eval_every > 0) {
    Rng eval_rng = root.derive(2);
    char idbuf[32];
    const auto add = [&](double w, TaskKind t) {
      if (w <= 0.0) return;
      for (int i = 0; i < cfg.eval_samples; ++i) {
        std::snprintf(idbuf, sizeof idbuf, "eval-%s-%04d", task_name(t).data(), i);
        eval_pool.push_back(gen_sample(eval_rng, t, cfg.env, idbuf));
      }
    };
    add(cfg.task_mix.score, TaskKind::kScore);
    add(cfg.task_mix.degradation, TaskKind::kDegradation);
    add(cfg.task_mix.comparison, TaskKind::kComparison);
    eval_log.open(cfg.log_dir / "eval_log.jsonl", std::ios::binary);
    if (!eval_log) throw IoError("cannot open eval log");
  }

  StepWorkspace ws;
  std::vector<GroupRollout> rollouts(tc.batch_size);
  std::vector<SyntheticSample> batch(tc.batch_size);
  long step = 0, batch_counter = 0;
  bool stop = false;

  while (step < total_steps && !stop) {
    // draw the batch serially so results are independent of thread count
    for (int g = 0; g < tc.batch_size; ++g) {
      const TaskKind task = draw_task(env_rng, cfg.task_mix);
      auto& task_pool = pool[static_cast<int>(task)];
      if (!task_pool.empty()) {
        const auto idx = static_cast<size_t>(env_rng.uniform01() * task_pool.size());
        batch[g] = task_pool[std::min(idx, task_pool.size() - 1)];
      } else {
        char idbuf[48];
        std::snprintf(idbuf, sizeof idbuf, "b%06ld-g%03d", batch_counter, g);
        batch[g] = gen_sample(env_rng, task, cfg.env, idbuf);
      }
    }

    const PolicyParams old_params = snapshot(params);
    const Rng batch_rng = root.derive(0x100000ULL + static_cast<std::uint64_t>(batch_counter));
    std::exception_ptr rollout_error;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (mode == ExecMode::kParallel)
#endif
    for (int g = 0; g < tc.batch_size; ++g) {
      try {
        rollouts[g] = build_rollout(old_params, batch[g], cfg.env, tc, batch_rng.derive(g));
      } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
        if (!rollout_error) rollout_error = std::current_exception();
      }
    }
    if (rollout_error) std::rethrow_exception(rollout_error);
    ++batch_counter;

    const BatchStats bs = batch_stats(rollouts);
    if (cfg.debug_dump_rollouts) {
      for (int g = 0; g < tc.batch_size; ++g) {
        const auto& r = rollouts[g];
        ordered_json truth;
        if (const auto* mos = std::get_if<MosTruth>(&r.truth)) {
          truth["mos"] = mos->mos;
        } else if (const auto* deg = std::get_if<DegTruth>(&r.truth)) {
          truth["class"] = class_name(deg->cls);
          truth["severity"] = severity_name(deg->sev);
        } else {
          const Choice c = std::get<CompTruth>(r.truth).better;
          truth["better"] = c == Choice::kA ? "A" : (c == Choice::kB ? "B" : "similar");
        }
        dump << ordered_json{{"step", step},
                             {"group", g},
                             {"id", r.sample_id},
                             {"task", task_name(r.task)},
                             {"truth", truth},
                             {"responses", r.responses},
                             {"old_log_probs", r.old_log_probs},
                             {"rewards", r.rewards},
                             {"advantages", r.advantages}}
                    .dump()
             << '\n';
      }
    }

    for (int k = 0; k < tc.inner_steps && step < total_steps && !stop; ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      const StepOutcome oc = grpo_step(params, opt, rollouts, params_ref, tc, step, total_steps,
                                       mode, &ws);
      const double wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      if (oc.ratio_clamps > 0) {
        std::cerr << "anomaly: " << oc.ratio_clamps << " probability ratio(s) clamped at step "
                  << step << '\n';
      }

      StepStats st;
      st.step = step;
      st.lr = lr_schedule(step, total_steps, tc.lr_start, tc.lr_end);
      st.mean_total_reward = bs.mean_total_reward;
      st.fmt_rate = bs.fmt_rate;
      st.scr_hit_rate = bs.scr_hit_rate;
      st.deg_acc = bs.deg_acc;
      st.lev_acc = bs.lev_acc;
      st.mean_kl = oc.mean_kl;
      st.objective = oc.objective;
      st.wall_ms = wall_ms;

      log << ordered_json{{"step", st.step},
                          {"lr", st.lr},
                          {"mean_total_reward", st.mean_total_reward},
                          {"fmt_rate", st.fmt_rate},
                          {"scr_hit_rate", opt_field(st.scr_hit_rate)},
                          {"deg_acc", opt_field(st.deg_acc)},
                          {"lev_acc", opt_field(st.lev_acc)},
                          {"mean_kl", st.mean_kl},
                          {"objective", st.objective}}
                 .dump()
          << '\n';
      if (!log) throw IoError("log write failed");

      ++step;
      if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step < total_steps) {
        save_checkpoint(params, cfg.log_dir / checkpoint_name(step));
      }
      if (cfg.eval_every > 0 && step % cfg.eval_every == 0) {
        const MetricReport rep =
            evaluate_samples(eval_pool, greedy_policy_decoder(params, cfg.env), tc.reward);
        ordered_json rec{{"step", step}};
        rec.update(json::parse(rep.to_json()));
        eval_log << rec.dump() << '\n';
      }
      if (stop_cb && stop_cb(st)) {
        stop = true;
        result.stopped_early = true;
      }
    }
  }

  result.steps_run = step;
  result.final_checkpoint = cfg.log_dir / "ckpt_final.json";
  save_checkpoint(params, result.final_checkpoint);
  return result;
}

Decoder greedy_policy_decoder(const PolicyParams& params, const EnvConfig& env) {
  return [params, env](const SyntheticSample& sample) {
    const auto ctx = encode_context(sample, sample.task, env, params.dims.context_dim);
    return params.vocab.detokenize(greedy_decode(params, ctx));
  };
}

MetricReport evaluate_samples(std::span<const SyntheticSample> samples, const Decoder& decoder,
                              const RewardConfig& reward_cfg) {
  MetricReport rep;
  std::vector<double> score_pred, score_gt;
  std::vector<ClassLevelPred> deg_preds;
  std::vector<DegTruth> deg_gts;
  int scr_hits = 0, comp_hits = 0, parse_failures = 0;

  for (const auto& s : samples) {
    const std::string text = decoder(s);
    const ParsedResponse parsed = parse_response(text);
    const auto payload = parse_answer_payload(parsed.answer_body, s.task);
    switch (s.task) {
      case TaskKind::kScore: {
        ++rep.n_score;
        const double gt = std::get<MosTruth>(s.truth).mos;
        if (payload) {
          const double pred = std::get<RatingAnswer>(*payload).value;
          score_pred.push_back(pred);
          score_gt.push_back(gt);
          scr_hits += score_reward(pred, gt, reward_cfg.score_threshold) > 0.0;
        } else {
          ++parse_failures;
        }
        break;
      }
      case TaskKind::kDegradation: {
        ++rep.n_degradation;
        deg_gts.push_back(std::get<DegTruth>(s.truth));
        if (payload) {
          const auto& a = std::get<DegradationAnswer>(*payload);
          deg_preds.push_back(DegTruth{a.cls, a.sev});
        } else {
          deg_preds.push_back(std::nullopt);
          ++parse_failures;
        }
        break;
      }
      case TaskKind::kComparison: {
        ++rep.n_comparison;
        if (payload) {
          comp_hits += std::get<ComparisonAnswer>(*payload).choice ==
                       std::get<CompTruth>(s.truth).better;
        } else {
          ++parse_failures;
        }
        break;
      }
    }
  }

  rep.n = static_cast<int>(samples.size());
  rep.parse_failures = parse_failures;
  if (score_pred.size() >= 2) {
    rep.plcc = plcc(score_pred, score_gt);
    rep.srcc = srcc(score_pred, score_gt);
  }
  if (rep.n_score > 0) {
    rep.scr_hit_rate = static_cast<double>(scr_hits) / rep.n_score;
  }
  if (!deg_gts.empty()) {
    MetricReport frag = class_level_accuracy(deg_preds, deg_gts);
    rep.deg_acc = frag.deg_acc;
    rep.lev_acc = frag.lev_acc;
    rep.per_class = std::move(frag.per_class);
  }
  if (rep.n_comparison > 0) {
    rep.comp_acc = static_cast<double>(comp_hits) / rep.n_comparison;
  }
  return rep;
}

GradeSummary grade_rewards(const std::filesystem::path& responses_path,
                           const std::filesystem::path& labels_path, const RewardConfig& cfg,
                           std::ostream& out) {
  cfg.validate();
  std::ifstream labels_in(labels_path, std::ios::binary);
  if (!labels_in) throw IoError("cannot open labels: " + labels_path.string());

  std::map<std::string, GroundTruth> labels;
  std::string line;
  long line_no = 0;
  while (std::getline(labels_in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id")) {
      out << ordered_json{{"type", "error"},
                          {"file", "labels"},
                          {"line", line_no},
                          {"message", "malformed label line"}}
                 .dump()
          << '\n';
      continue;
    }
    try {
      const auto id = j.at("id").get<std::string>();
      if (j.contains("mos")) {
        labels[id] = MosTruth{j.at("mos").get<double>()};
      } else if (j.contains("class") && j.contains("severity")) {
        const auto cls = parse_class(j.at("class").get<std::string>());
        const auto sev = parse_severity(j.at("severity").get<std::string>());
        if (!cls || !sev) throw std::runtime_error("unknown class or severity");
        labels[id] = DegTruth{*cls, *sev};
      } else if (j.contains("better")) {
        const std::string b = to_lower(j.at("better").get<std::string>());
        if (b == "a") {
          labels[id] = CompTruth{Choice::kA};
        } else if (b == "b") {
          labels[id] = CompTruth{Choice::kB};
        } else if (b == "similar") {
          labels[id] = CompTruth{Choice::kSimilar};
        } else {
          throw std::runtime_error("bad \"better\" value");
        }
      } else {
        throw std::runtime_error("label line has no recognized truth keys");
      }
    } catch (const std::exception& e) {
      out << ordered_json{
                 {"type", "error"}, {"file", "labels"}, {"line", line_no}, {"message", e.what()}}
                 .dump()
          << '\n';
    }
  }

  std::ifstream resp_in(responses_path, std::ios::binary);
  if (!resp_in) throw IoError("cannot open responses: " + responses_path.string());

  GradeSummary summary;
  RewardBreakdown sums;
  line_no = 0;
  while (std::getline(resp_in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto j = json::parse(line, nullptr, false);
    std::string id;
    std::optional<TaskKind> task;
    std::string text;
    bool ok = !j.is_discarded() && j.is_object();
    if (ok) {
      try {
        id = j.at("id").get<std::string>();
        task = parse_task(j.at("task").get<std::string>());
        text = j.at("text").get<std::string>();
        ok = task.has_value();
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) {
      ++summary.n_errors;
      out << ordered_json{{"type", "error"},
                          {"file", "responses"},
                          {"line", line_no},
                          {"message", "malformed response line"}}
                 .dump()
          << '\n';
      continue;
    }
    const auto it = labels.find(id);
    if (it == labels.end()) {
      summary.unmatched.push_back(id);
      continue;
    }
    if (truth_task(it->second) != *task) {
      ++summary.n_errors;
      out << ordered_json{{"type", "error"},
                          {"file", "responses"},
                          {"line", line_no},
                          {"message", "label kind does not match task for id " + id}}
                 .dump()
          << '\n';
      continue;
    }
    const RewardBreakdown b = evaluate_response(text, it->second, *task, cfg);
    out << ordered_json{{"id", id},
                        {"task", task_name(*task)},
                        {"r_fmt", b.r_fmt},
                        {"r_scr", b.r_scr},
                        {"r_deg", b.r_deg},
                        {"r_lev", b.r_lev},
                        {"r_comp", b.r_comp},
                        {"total", b.total}}
               .dump()
        << '\n';
    ++summary.n_scored;
    sums.r_fmt += b.r_fmt;
    sums.r_scr += b.r_scr;
    sums.r_deg += b.r_deg;
    sums.r_lev += b.r_lev;
    sums.r_comp += b.r_comp;
    sums.total += b.total;
  }

  if (summary.n_scored > 0) {
    const double inv = 1.0 / summary.n_scored;
    summary.mean_components = {sums.r_fmt * inv, sums.r_scr * inv, sums.r_deg * inv,
                               sums.r_lev * inv, sums.r_comp * inv, sums.total * inv};
    summary.mean_total = sums.total * inv;
  }
  out << ordered_json{{"type", "aggregate"},
                      {"n", summary.n_scored},
                      {"errors", summary.n_errors},
                      {"mean_r_fmt", summary.mean_components.r_fmt},
                      {"mean_r_scr", summary.mean_components.r_scr},
                      {"mean_r_deg", summary.mean_components.r_deg},
                      {"mean_r_lev", summary.mean_components.r_lev},
                      {"mean_r_comp", summary.mean_components.r_comp},
                      {"mean_total", summary.mean_total},
                      {"unmatched", summary.unmatched}}
             .dump()
      << '\n';
  return summary;
}

}  // namespace gql
