// gql: train, evaluate, grade, and generate data for the synthetic
// quality-assessment RL lab.
//
// exit codes: 0 ok, 2 invalid config/arguments, 3 training divergence,
// 4 I/O failure.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "gql/trainer.hpp"

namespace {

int run_guarded(const std::filesystem::path& diag_dir, const std::function<void()>& fn) {
  try {
    fn();
    return 0;
  } catch (const gql::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const gql::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    if (!diag_dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(diag_dir, ec);
      std::ofstream dump(diag_dir / "divergence.txt");
      dump << e.what() << '\n';
    }
    return 3;
  } catch (const gql::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic GRPO quality-assessment lab"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "run the GRPO training loop");
  std::string train_config;
  int threads = 0;
  train->add_option("--config", train_config, "run config JSON")->required();
  train->add_option("--threads", threads, "worker threads (overrides config)");

  // eval
  auto* eval = app.add_subcommand("eval", "greedy-decode a checkpoint over a dataset");
  std::string eval_ckpt, eval_data, eval_config;
  bool eval_csv = false;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint JSON")->required();
  eval->add_option("--data", eval_data, "dataset file or directory")->required();
  eval->add_option("--config", eval_config, "run config for env normalization (optional)");
  eval->add_flag("--csv", eval_csv, "also print a CSV row");

  // reward
  auto* reward = app.add_subcommand("reward", "grade responses offline against labels");
  std::string resp_path, labels_path, reward_out;
  gql::RewardConfig reward_cfg;
  reward->add_option("--responses", resp_path, "responses JSONL")->required();
  reward->add_option("--labels", labels_path, "labels JSONL")->required();
  reward->add_option("--epsilon", reward_cfg.score_threshold, "score threshold");
  reward->add_option("--alpha1", reward_cfg.alpha1, "class reward weight");
  reward->add_option("--alpha2", reward_cfg.alpha2, "class+level reward weight");
  reward->add_option("--out", reward_out, "report path (default stdout)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate synthetic dataset files");
  std::string gen_config, gen_out;
  int n_score = -1, n_deg = -1, n_comp = -1;
  gen->add_option("--config", gen_config, "run config JSON")->required();
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--score", n_score, "score sample count");
  gen->add_option("--degradation", n_deg, "degradation sample count");
  gen->add_option("--comparison", n_comp, "comparison sample count");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) {
    gql::RunConfig cfg;
    const int rc = run_guarded("", [&] { cfg = gql::load_run_config(train_config); });
    if (rc != 0) return rc;
    if (threads > 0) cfg.threads = threads;
    return run_guarded(cfg.log_dir, [&] {
      const gql::TrainResult res = gql::run_train(cfg);
      std::cout << "steps: " << res.steps_run << "\nlog: " << res.log_path.string()
                << "\ncheckpoint: " << res.final_checkpoint.string() << '\n';
    });
  }

  if (eval->parsed()) {
    return run_guarded("", [&] {
      const gql::PolicyParams params = gql::load_checkpoint(eval_ckpt);
      if (!(params.vocab == gql::make_default_vocab())) {
        throw gql::ConfigError("checkpoint vocabulary does not match the response grammar");
      }
      gql::EnvConfig env;
      gql::RewardConfig rcfg;
      if (!eval_config.empty()) {
        const gql::RunConfig rc = gql::load_run_config(eval_config);
        env = rc.env;
        rcfg = rc.train.reward;
      }
      env.feature_dim = params.dims.context_dim - 4;
      int malformed = 0;
      const auto samples = gql::load_samples(eval_data, &malformed);
      if (samples.empty()) throw gql::ConfigError("dataset has no usable samples");
      const gql::MetricReport rep =
          gql::evaluate_samples(samples, gql::greedy_policy_decoder(params, env), rcfg);
      std::cout << rep.to_json() << '\n';
      if (malformed > 0) std::cerr << "skipped " << malformed << " malformed dataset lines\n";
      if (eval_csv) {
        std::cout << gql::MetricReport::csv_header() << '\n' << rep.to_csv_row() << '\n';
      }
    });
  }

  if (reward->parsed()) {
    return run_guarded("", [&] {
      std::ofstream file;
      std::ostream* out = &std::cout;
      if (!reward_out.empty()) {
        file.open(reward_out, std::ios::binary);
        if (!file) throw gql::IoError("cannot open report output: " + reward_out);
        out = &file;
      }
      gql::grade_rewards(resp_path, labels_path, reward_cfg, *out);
    });
  }

  // gen-data
  return run_guarded("", [&] {
    const gql::RunConfig rc = gql::load_run_config(gen_config);
    gql::DatasetCounts counts;
    counts.score = n_score >= 0 ? n_score : 0;
    counts.degradation = n_deg >= 0 ? n_deg : 0;
    counts.comparison = n_comp >= 0 ? n_comp : 0;
    const gql::DatasetManifest manifest = gql::make_dataset(rc.env, counts, gen_out);
    std::cout << "checksum: " << manifest.checksum << '\n';
  });
}
