#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "exp/config.hpp"
#include "exp/evaluate.hpp"
#include "exp/report.hpp"

using namespace audioinv;
using namespace audioinv::exp;

namespace fs = std::filesystem;

namespace {

// desk-test profile: everything minutes -> seconds
ExperimentConfig micro_config(const std::string& out, uint64_t seed = 77) {
  ExperimentConfig c = default_config("toy");
  c.seed = seed;
  c.out_dir = out;
  c.canonical_length = 1024;
  c.gen.latent_dim = 4;
  c.gen.model_dim = 2;
  c.gen.output_length = 1024;
  c.gan_train.steps = 2;
  c.gan_train.batch_size = 4;
  c.gan_train.critic_steps = 1;
  c.clf_body.width = 4;
  c.clf_body.blocks_per_stage = 1;
  c.clf_train.steps = 20;
  c.clf_train.batch_size = 8;
  c.mapper_body.width = 4;
  c.mapper_body.blocks_per_stage = 1;
  c.inverter_train.epochs = 4;
  c.inverter_train.batch_size = 4;
  c.gd.max_steps = 8;
  c.hybrid.max_steps = 3;
  c.num_targets = 2;
  c.workers = 2;
  c.figure_count = 1;
  c.toy_per_class = 3;
  c.heldout_fraction = 0.34;
  c.clf_body.in_h = c.spec_frames();
  c.clf_body.in_w = c.spec_bins();
  c.mapper_body.in_h = c.spec_frames();
  c.mapper_body.in_w = c.spec_bins();
  c.validate();
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config: profiles, json overrides, stable hash") {
  ExperimentConfig toy = default_config("toy");
  CHECK(toy.gen.latent_dim == 16);
  CHECK(toy.gd.max_steps == 1000);
  CHECK(toy.hybrid.max_steps == 50);
  CHECK(toy.num_targets == 32);

  ExperimentConfig full = default_config("full");
  CHECK(full.gen.latent_dim == 100);
  CHECK(full.canonical_length == 16384);
  CHECK(full.gd.max_steps == 50000);
  CHECK(full.hybrid.max_steps == 200);
  CHECK(full.inverter_train.epochs == 250);
  CHECK(full.inverter_train.batch_size == 64);

  CHECK_THROWS(default_config("huge"));

  ExperimentConfig o = config_from_json_text(
      R"({"profile":"toy","seed":5,"gd":{"max_steps":123},"eval":{"num_targets":3}})");
  CHECK(o.seed == 5);
  CHECK(o.gd.max_steps == 123);
  CHECK(o.num_targets == 3);
  CHECK(o.hybrid.max_steps == 50);  // untouched default

  CHECK(config_hash(o) == config_hash(o));
  ExperimentConfig o2 = o;
  o2.seed = 6;
  CHECK(config_hash(o) != config_hash(o2));
  o2 = o;
  o2.out_dir = "elsewhere";  // location does not change identity
  CHECK(config_hash(o) == config_hash(o2));
}

TEST_CASE("table csv: fake table has no accuracy column") {
  ResultsTable t;
  t.kind = "fake";
  MethodRow r;
  r.name = "Fake";
  clf::InceptionScore is;
  is.mean = 7.0;
  is.stddev = 0.1;
  r.inception = is;
  t.rows.push_back(r);
  const std::string csv = table_to_csv(t);
  CHECK(csv.find("accuracy") == std::string::npos);
  CHECK(csv.find("inception_mean") != std::string::npos);

  ResultsTable tr;
  tr.kind = "real";
  tr.has_accuracy_column = true;
  tr.rows.push_back(r);
  CHECK(table_to_csv(tr).find("accuracy") != std::string::npos);
}

TEST_CASE("pipeline: train all three, evaluate, report") {
  const std::string out =
      (fs::temp_directory_path() / "audioinv_micro_run").string();
  fs::remove_all(out);
  ExperimentConfig cfg = micro_config(out);

  // inverter requires its prerequisites by name
  CHECK_THROWS_WITH_AS(cmd_train_inverter(cfg), doctest::Contains("gan"),
                       std::runtime_error);

  cmd_train_gan(cfg);
  CHECK_THROWS_WITH_AS(cmd_train_inverter(cfg), doctest::Contains("classifier"),
                       std::runtime_error);
  cmd_train_classifier(cfg);
  cmd_train_inverter(cfg);
  CHECK(fs::exists(fs::path(out) / "checkpoints/gan/manifest.json"));
  CHECK(fs::exists(fs::path(out) / "checkpoints/classifier/train_log.json"));
  CHECK(fs::exists(fs::path(out) / "checkpoints/mapper/manifest.json"));

  EvalOutcome outcome = run_evaluate(cfg);

  // accounting: 2 targets x 3 methods per table, sidecar per success
  int fake_sidecars = 0;
  for (const auto& e : fs::directory_iterator(fs::path(out) / "fake"))
    if (e.path().extension() == ".json") ++fake_sidecars;
  CHECK(fake_sidecars == 6);

  REQUIRE(outcome.fake_table.rows.size() == 4);
  REQUIRE(outcome.real_table.rows.size() == 4);
  CHECK(!outcome.fake_table.has_accuracy_column);
  CHECK(outcome.real_table.has_accuracy_column);
  CHECK(outcome.fake_table.rows[0].name == "Fake");
  CHECK(outcome.real_table.rows[0].name == "Real");
  CHECK(outcome.real_table.rows[0].accuracy.has_value());
  CHECK(!outcome.fake_table.rows[0].mse_raw.has_value());
  for (int mi = 1; mi <= 3; ++mi) {
    CHECK(outcome.fake_table.rows[mi].mse_raw.has_value());
    CHECK(outcome.fake_table.rows[mi].ssim.has_value());
    CHECK(outcome.real_table.rows[mi].accuracy.has_value());
  }

  CHECK(fs::exists(fs::path(out) / "fake_table.csv"));
  CHECK(fs::exists(fs::path(out) / "real_table.csv"));
  CHECK(fs::exists(fs::path(out) / "results.json"));
  CHECK(fs::exists(fs::path(out) / "figures/fake0.pgm"));

  const std::string report = render_report(out);
  CHECK(report.find("Gradient-based") != std::string::npos);
  CHECK(report.find("Hybrid") != std::string::npos);
  CHECK(report.find("failed targets") != std::string::npos);
}

TEST_CASE("pipeline: fixed seed reproduces byte-identical tables") {
  const std::string out1 =
      (fs::temp_directory_path() / "audioinv_repro_a").string();
  const std::string out2 =
      (fs::temp_directory_path() / "audioinv_repro_b").string();
  fs::remove_all(out1);
  fs::remove_all(out2);

  ExperimentConfig c1 = micro_config(out1, 123);
  cmd_train_gan(c1);
  cmd_train_classifier(c1);
  cmd_train_inverter(c1);
  run_evaluate(c1);

  // second run reuses the same checkpoints but writes elsewhere
  ExperimentConfig c2 = micro_config(out2, 123);
  c2.gan_ckpt = out1 + "/checkpoints/gan";
  c2.classifier_ckpt = out1 + "/checkpoints/classifier";
  c2.mapper_ckpt = out1 + "/checkpoints/mapper";
  run_evaluate(c2);

  CHECK(slurp(out1 + "/fake_table.csv") == slurp(out2 + "/fake_table.csv"));
  CHECK(slurp(out1 + "/real_table.csv") == slurp(out2 + "/real_table.csv"));
}
