#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "data/dataset.hpp"
#include "gan/gan_train.hpp"

using namespace audioinv;
using namespace audioinv::gan;

namespace {

GeneratorConfig tiny_gen_cfg() {
  GeneratorConfig cfg;
  cfg.latent_dim = 4;
  cfg.model_dim = 2;
  cfg.output_length = 1024;
  return cfg;
}

CriticConfig tiny_critic_cfg() {
  CriticConfig cfg;
  cfg.model_dim = 2;
  cfg.input_length = 1024;
  cfg.end_len = 16;
  return cfg;
}

}  // namespace

TEST_CASE("train_gan: 1-step run checkpoints and reloads bitwise") {
  auto dir = std::filesystem::temp_directory_path() / "audioinv_gan_train";
  std::filesystem::remove_all(dir);

  data::LabeledDataset ds = data::make_toy_digits(2, 1024, 5);
  Generator g(tiny_gen_cfg(), 1);
  Critic d(tiny_critic_cfg(), 1);

  GanTrainConfig cfg;
  cfg.steps = 1;
  cfg.batch_size = 4;
  cfg.critic_steps = 2;
  cfg.checkpoint_dir = dir.string();
  Rng rng(9);
  GanTrainLog log = train_gan(g, d, ds.clips_only(), cfg, rng);

  REQUIRE(log.critic_loss.size() == 2);
  REQUIRE(log.gen_loss.size() == 1);
  for (float v : log.critic_loss) CHECK(std::isfinite(v));
  for (float v : log.gen_loss) CHECK(std::isfinite(v));

  REQUIRE(std::filesystem::exists(dir / "params.bin"));
  Generator g2 = Generator::load_checkpoint(dir.string());
  Rng zr(4);
  LatentVector z = sample_latent(zr, 4);
  CHECK(g.generate(z).samples == g2.generate(z).samples);
}

TEST_CASE("train_gan: same seed and config reproduce the loss trace") {
  data::LabeledDataset ds = data::make_toy_digits(2, 1024, 5);
  GanTrainConfig cfg;
  cfg.steps = 3;
  cfg.batch_size = 4;
  cfg.critic_steps = 2;

  Generator ga(tiny_gen_cfg(), 1);
  Critic da(tiny_critic_cfg(), 1);
  Rng ra(31);
  GanTrainLog la = train_gan(ga, da, ds.clips_only(), cfg, ra);

  Generator gb(tiny_gen_cfg(), 1);
  Critic db(tiny_critic_cfg(), 1);
  Rng rb(31);
  GanTrainLog lb = train_gan(gb, db, ds.clips_only(), cfg, rb);

  CHECK(la.critic_loss == lb.critic_loss);
  CHECK(la.gen_loss == lb.gen_loss);
}

TEST_CASE("train_gan rejects an empty dataset") {
  Generator g(tiny_gen_cfg(), 1);
  Critic d(tiny_critic_cfg(), 1);
  GanTrainConfig cfg;
  Rng rng(1);
  CHECK_THROWS(train_gan(g, d, {}, cfg, rng));
}
