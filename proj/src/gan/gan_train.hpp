#pragma once

#include <string>
#include <vector>

#include "audio/audio.hpp"
#include "core/rng.hpp"
#include "gan/generator.hpp"

namespace audioinv::gan {

struct GanTrainConfig {
  int64_t steps = 2000;  // generator updates
  int64_t batch_size = 64;
  float lr = 1e-4f;
  float beta1 = 0.5f;
  float beta2 = 0.9f;
  float gp_weight = 10.0f;
  int64_t critic_steps = 5;  // critic updates per generator update
  int64_t checkpoint_every = 0;  // 0 = final checkpoint only
  std::string checkpoint_dir;

  void validate() const;
};

struct GanTrainLog {
  std::vector<float> critic_loss;  // one entry per critic update
  std::vector<float> gen_loss;     // one entry per generator update
};

// Wasserstein objective with gradient penalty. Trains g and d in place;
// aborts with a diagnostic on non-finite loss. Writes checkpoints of the
// generator per config.
GanTrainLog train_gan(Generator& g, Critic& d,
                      const std::vector<audio::AudioClip>& real,
                      const GanTrainConfig& cfg, Rng& rng);

}  // namespace audioinv::gan
