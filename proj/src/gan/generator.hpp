#pragma once

#include <string>
#include <vector>

#include "audio/audio.hpp"
#include "core/autograd.hpp"
#include "core/rng.hpp"
#include "nn/module.hpp"

namespace audioinv::gan {

// Point in the generator input space, components nominally in [-1, 1].
struct LatentVector {
  std::vector<float> values;
  int64_t dim() const { return static_cast<int64_t>(values.size()); }
};

// d independent uniform draws on [-1, 1]
LatentVector sample_latent(Rng& rng, int64_t d);

// shifts drawn uniformly from [-n, n], one per (batch, channel)
std::vector<int> draw_phase_shifts(int64_t count, int n, Rng& rng);

// Discriminator regularizer: shifts each channel along time by a random
// integer in [-n, n], reflection fill. n = 0 is the identity.
ag::Var phase_shuffle(const ag::Var& x, int n, Rng& rng);
Tensor phase_shuffle(const Tensor& x, int n, Rng& rng);

struct GeneratorConfig {
  int64_t latent_dim = 100;
  int64_t model_dim = 64;
  int64_t output_length = audio::kDefaultClipLength;
  int64_t start_len = 16;
  int64_t kernel = 24;  // stride-aligned so each layer is an exact stride-4 adjoint
  int stride = 4;

  int64_t upsample_layers() const;
  void validate() const;
};

// Raw-waveform generator: dense projection followed by a stack of strided
// transpose convolutions, tanh output. Deterministic function of
// (parameters, z).
class Generator {
 public:
  Generator(GeneratorConfig cfg, uint64_t init_seed);

  // z[B,d] -> wave[B,L]
  ag::Var forward(const ag::Var& z) const;

  audio::AudioClip generate(const LatentVector& z) const;
  // batched convenience: z[B,d] -> [B,L], no graph
  Tensor generate_batch(const Tensor& z) const;

  const GeneratorConfig& config() const { return cfg_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  void set_trainable(bool on) { params_.set_requires_grad(on); }

  void save_checkpoint(const std::string& dir) const;
  static Generator load_checkpoint(const std::string& dir);

 private:
  GeneratorConfig cfg_;
  nn::ParamSet params_;
  nn::Linear stem_;
  std::vector<nn::ConvTranspose1d> ups_;
};

struct CriticConfig {
  int64_t model_dim = 64;
  int64_t input_length = audio::kDefaultClipLength;
  int64_t end_len = 16;
  int64_t kernel = 24;
  int stride = 4;
  int phase_shuffle_n = 2;
  float leaky_slope = 0.2f;
};

// WGAN critic: strided convolution stack with phase shuffle between layers,
// linear head, unbounded scalar score.
class Critic {
 public:
  Critic(CriticConfig cfg, uint64_t init_seed);

  // x[B,1,L] -> scores [B,1]; draws fresh phase shifts from rng
  ag::Var forward(const ag::Var& x, Rng& rng) const;

  const CriticConfig& config() const { return cfg_; }
  nn::ParamSet& params() { return params_; }
  void set_trainable(bool on) { params_.set_requires_grad(on); }

 private:
  CriticConfig cfg_;
  nn::ParamSet params_;
  std::vector<nn::Conv1d> downs_;
  nn::Linear head_;
};

}  // namespace audioinv::gan
