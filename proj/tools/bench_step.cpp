// Compares the serial and OpenMP execution of the training step kernel
// (rollout sampling + reward evaluation + per-group gradients) and checks
// that both produce bit-identical parameters.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gql/trainer.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct BenchResult {
  double ms_per_step = 0.0;
  gql::PolicyParams params;
};

BenchResult run(gql::ExecMode mode, int threads, int steps, int batch) {
#ifdef _OPENMP
  omp_set_num_threads(threads);
#else
  (void)threads;
#endif
  const gql::Vocabulary vocab = gql::make_default_vocab();
  gql::EnvConfig env;
  env.feature_noise_scale = 0.0;
  gql::TrainConfig tc;
  tc.batch_size = batch;
  tc.seed = 7;

  gql::PolicyDims dims;
  dims.context_dim = env.feature_dim + 4;
  gql::PolicyParams params = gql::init_policy(dims, vocab, 99);
  const gql::PolicyParams ref = gql::make_format_reference(dims, vocab);
  gql::OptimizerState opt(dims);
  gql::StepWorkspace ws;

  const gql::Rng root(tc.seed);
  gql::Rng env_rng = root.derive(0);

  // rollout building mirrors the trainer: serial draws, parallel groups
  std::vector<gql::GroupRollout> rollouts(batch);
  const auto t0 = Clock::now();
  for (int step = 0; step < steps; ++step) {
    std::vector<gql::SyntheticSample> samples(batch);
    for (int g = 0; g < batch; ++g) {
      const auto task = g % 2 == 0 ? gql::TaskKind::kScore : gql::TaskKind::kDegradation;
      samples[g] = gql::gen_sample(env_rng, task, env, "bench");
    }
    const gql::PolicyParams old_params = params;
    const gql::Rng batch_rng = root.derive(0x100000ULL + step);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (mode == gql::ExecMode::kParallel)
#endif
    for (int g = 0; g < batch; ++g) {
      gql::Rng rng = batch_rng.derive(g);
      gql::GroupRollout r;
      r.sample_id = samples[g].id;
      r.task = samples[g].task;
      r.truth = samples[g].truth;
      r.ctx = gql::encode_context(samples[g], samples[g].task, env, dims.context_dim);
      std::vector<std::string> texts;
      for (int i = 0; i < tc.group_size; ++i) {
        gql::SequenceSample seq = gql::sample_sequence(old_params, r.ctx, rng);
        r.old_log_probs.push_back(seq.total_logp);
        texts.push_back(vocab.detokenize(seq.tokens));
        r.responses.push_back(std::move(seq.tokens));
      }
      r.breakdowns = gql::evaluate_group(texts, r.truth, r.task, tc.reward);
      for (const auto& b : r.breakdowns) r.rewards.push_back(b.total);
      r.advantages = gql::normalize_advantages(r.rewards);
      rollouts[g] = std::move(r);
    }
    gql::grpo_step(params, opt, rollouts, ref, tc, step, steps, mode, &ws);
  }
  const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  return {ms / steps, std::move(params)};
}

bool identical(const gql::PolicyParams& a, const gql::PolicyParams& b) {
  const auto eq = [](const std::vector<double>& x, const std::vector<double>& y) {
    return x.size() == y.size() &&
           std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
  };
  return eq(a.enc_w, b.enc_w) && eq(a.enc_b, b.enc_b) && eq(a.emb, b.emb) &&
         eq(a.head_w, b.head_w) && eq(a.head_b, b.head_b);
}

}  // namespace

int main(int argc, char** argv) {
  int steps = 20, batch = 32;
  if (argc > 1) steps = std::atoi(argv[1]);
  if (argc > 2) batch = std::atoi(argv[2]);

  std::printf("training step benchmark: %d steps, batch %d, group 8\n", steps, batch);
  const BenchResult serial = run(gql::ExecMode::kSerial, 1, steps, batch);
  std::printf("%-10s %2d thread(s)  %8.2f ms/step\n", "serial", 1, serial.ms_per_step);

#ifdef _OPENMP
  for (int threads : {1, 2, 4}) {
    if (threads > omp_get_max_threads() && threads != 1) {
      // still run it: oversubscription is allowed, just not informative
    }
    const BenchResult par = run(gql::ExecMode::kParallel, threads, steps, batch);
    std::printf("%-10s %2d thread(s)  %8.2f ms/step  bit-identical: %s\n", "openmp", threads,
                par.ms_per_step, identical(serial.params, par.params) ? "yes" : "NO");
  }
#else
  std::printf("built without OpenMP; parallel lane unavailable\n");
#endif
  return 0;
}
