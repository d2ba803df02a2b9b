// Command-line harness: train the components, run the three inversion
// methods over fake and real targets, and render result tables and figures.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "exp/config.hpp"
#include "exp/evaluate.hpp"
#include "exp/report.hpp"

using namespace audioinv;

namespace {

exp::ExperimentConfig resolve_config(const std::string& config_path,
                                     const std::string& profile, uint64_t seed,
                                     bool seed_set, const std::string& out_dir,
                                     int workers) {
  exp::ExperimentConfig cfg = config_path.empty() ? exp::default_config(profile)
                                                  : exp::load_config(config_path);
  if (seed_set) cfg.seed = seed;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (workers > 0) cfg.workers = workers;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"audioinv - latent vector recovery for a raw-waveform audio GAN"};
  app.require_subcommand(1);

  std::string config_path;
  std::string profile = "toy";
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
  app.add_option("--config", config_path, "JSON config file (overrides profile defaults)");
  app.add_option("--profile", profile, "built-in profile: toy | full")
      ->check(CLI::IsMember({"toy", "full"}));
  app.add_option("--out", out_dir, "output directory override");
  app.add_option("--seed", seed, "seed override")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--workers", workers, "evaluation worker threads");

  auto* train = app.add_subcommand("train", "train a component");
  std::string target;
  train->add_option("--target", target, "gan | classifier | inverter")
      ->required()
      ->check(CLI::IsMember({"gan", "classifier", "inverter"}));

  auto* evaluate = app.add_subcommand(
      "evaluate", "run all three inversion methods over fake and real targets");

  auto* report = app.add_subcommand("report", "summarize evaluation results");
  std::string results_dir;
  report->add_option("--results", results_dir, "results directory")->required();

  auto* invert = app.add_subcommand("invert", "invert a single WAV file");
  std::string wav_path, method = "hybrid";
  invert->add_option("--input", wav_path, "target WAV file")->required();
  invert->add_option("--method", method, "gradient | mapper | hybrid")
      ->check(CLI::IsMember({"gradient", "mapper", "hybrid"}));

  auto* dump = app.add_subcommand("config", "print the resolved config as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      std::cout << exp::render_report(results_dir);
      return 0;
    }
    exp::ExperimentConfig cfg =
        resolve_config(config_path, profile, seed, seed_set, out_dir, workers);

    if (dump->parsed()) {
      std::cout << exp::config_to_json(cfg) << "\n";
      return 0;
    }
    if (train->parsed()) {
      std::string ckpt;
      if (target == "gan")
        ckpt = exp::cmd_train_gan(cfg);
      else if (target == "classifier")
        ckpt = exp::cmd_train_classifier(cfg);
      else
        ckpt = exp::cmd_train_inverter(cfg);
      std::cout << "checkpoint written to " << ckpt << "\n";
      return 0;
    }
    if (evaluate->parsed()) {
      exp::EvalOutcome outcome = exp::run_evaluate(cfg);
      std::cout << exp::table_to_csv(outcome.fake_table)
                << exp::table_to_csv(outcome.real_table);
      for (const auto& d : outcome.diagnostics) std::cout << "! " << d << "\n";
      std::cout << "results written to " << outcome.out_dir << "\n";
      return 0;
    }
    if (invert->parsed()) {
      exp::run_single_inversion(cfg, wav_path, method,
                                cfg.out_dir.empty() ? "." : cfg.out_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
