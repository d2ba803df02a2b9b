#pragma once

#include <string>
#include <vector>

#include "audio/audio.hpp"
#include "classifier/classifier.hpp"
#include "core/rng.hpp"
#include "gan/generator.hpp"
#include "invert/invert.hpp"

namespace audioinv::inv {

// Residual network mapping a spectrogram to a latent vector. Linear head,
// no terminal activation; outputs are unbounded by design.
class InverseMapper {
 public:
  InverseMapper(clf::ResNetConfig cfg, int64_t latent_dim, uint64_t init_seed);

  // x[B,1,F,bins] -> [B,latent_dim]
  ag::Var forward(const ag::Var& x) const;
  gan::LatentVector predict(const audio::Spectrogram& s) const;

  int64_t latent_dim() const { return latent_dim_; }
  const clf::ResNetConfig& body_config() const { return body_.config(); }
  nn::ParamSet& params() { return params_; }
  void set_trainable(bool on) { params_.set_requires_grad(on); }

  void save_checkpoint(const std::string& dir) const;
  static InverseMapper load_checkpoint(const std::string& dir);

 private:
  int64_t latent_dim_;
  nn::ParamSet params_;
  clf::ResNetBody body_;
  nn::Linear head_;
};

struct InverterTrainConfig {
  int64_t epochs = 250;  // each epoch = one real batch then one fake batch
  int64_t batch_size = 64;
  float lr = 1e-3f;
  float lambda_latent = 1.0f;
  float lambda_perc = 1.0f;
  bool perc_mean_per_block = true;

  void validate() const;
};

struct InverterTrainLog {
  std::vector<float> real_loss;  // perceptual-only branch
  std::vector<float> fake_loss;  // latent MSE + perceptual branch
  std::vector<float> fake_latent_mse;
};

// Alternating two-branch training: per epoch, one batch of real audio
// (perceptual loss only), then one batch of generator output sampled fresh
// at run time (latent MSE plus perceptual loss). Generator and classifier
// parameters stay frozen for the duration.
InverterTrainLog train_inverter(InverseMapper& m, gan::Generator& g,
                                clf::DigitClassifier& c,
                                const std::vector<audio::AudioClip>& real,
                                const InverterTrainConfig& cfg, Rng& rng,
                                const audio::SpectrogramConfig& scfg);

// Deep prediction followed by a short budget of quasi-Newton refinement.
// The best-so-far rule guarantees the final objective never exceeds the
// prediction-only objective.
InversionResult invert_hybrid(const InverseMapper& m, const gan::Generator& g,
                              const audio::AudioClip& target, const GdConfig& cfg,
                              Rng& rng, const audio::SpectrogramConfig& scfg);

// Prediction-only inversion packaged as an InversionResult (steps_used = 0).
InversionResult invert_mapper(const InverseMapper& m, const gan::Generator& g,
                              const audio::AudioClip& target, Rng& rng,
                              const audio::SpectrogramConfig& scfg,
                              bool log_spectrogram = true);

}  // namespace audioinv::inv
