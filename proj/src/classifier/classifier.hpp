#pragma once

#include <string>
#include <vector>

#include "audio/audio.hpp"
#include "core/autograd.hpp"
#include "core/rng.hpp"
#include "nn/module.hpp"

namespace audioinv::clf {

// Residual CNN over spectrograms: stem conv, four strided stages of
// residual blocks, head decided by the owner (classification logits or
// latent regression). Norm-free; each block carries a learnable residual
// scale so deep stacks stay trainable.
struct ResNetConfig {
  int64_t width = 64;          // stage 1 channels; stages double
  int64_t blocks_per_stage = 2;  // 2 gives the 18-layer layout
  int64_t in_h = 127;          // spectrogram frames
  int64_t in_w = 129;          // frequency bins
  float input_shift = 7.0f;    // fixed affine applied to log-magnitudes
  float input_scale = 0.25f;
};

class ResNetBody {
 public:
  ResNetBody() = default;
  ResNetBody(nn::ParamSet& ps, const ResNetConfig& cfg, Rng& rng);

  // x[B,1,H,W] (raw log-magnitudes; affine applied inside)
  // -> features [B, 8*width]
  ag::Var forward(const ag::Var& x) const;
  // one tap per stage, each [B,C,H,W]
  std::vector<ag::Var> stage_taps(const ag::Var& x) const;

  int64_t out_channels() const { return cfg_.width * 8; }
  const ResNetConfig& config() const { return cfg_; }

 private:
  struct Block {
    nn::Conv2d conv1, conv2, proj;
    bool has_proj = false;
    ag::Var res_scale;
  };
  ag::Var run_block(const Block& blk, const ag::Var& x) const;

  ResNetConfig cfg_;
  nn::Conv2d stem_;
  std::vector<std::vector<Block>> stages_;
};

struct ClassifierTrainConfig {
  int64_t steps = 2000;
  int64_t batch_size = 64;
  float lr = 1e-3f;
  double heldout_fraction = 0.1;
  uint64_t split_seed = 17;
};

struct ClassifierTrainReport {
  std::vector<float> loss_trace;
  double heldout_accuracy = 0.0;
  int64_t heldout_count = 0;
};

// Spoken-digit classifier over spectrograms; also the feature extractor
// behind the perceptual loss and the scorer behind the inception metric.
class DigitClassifier {
 public:
  DigitClassifier(ResNetConfig cfg, int64_t num_classes, uint64_t init_seed);

  // logits over classes, [B,num_classes]
  ag::Var forward_logits(const ag::Var& x) const;
  // softmax probabilities for one spectrogram
  std::vector<double> classify(const audio::Spectrogram& s) const;
  // per-stage activation taps (the perceptual feature stack)
  std::vector<ag::Var> features_var(const ag::Var& x) const;
  std::vector<Tensor> features(const audio::Spectrogram& s) const;

  int64_t num_classes() const { return num_classes_; }
  const ResNetConfig& body_config() const { return body_.config(); }
  nn::ParamSet& params() { return params_; }
  void set_trainable(bool on) { params_.set_requires_grad(on); }

  // [bins,frames] spectrogram -> [1,1,frames,bins] network input
  static Tensor spec_to_input(const audio::Spectrogram& s);

  void save_checkpoint(const std::string& dir) const;
  static DigitClassifier load_checkpoint(const std::string& dir);

 private:
  int64_t num_classes_;
  nn::ParamSet params_;
  ResNetBody body_;
  nn::Linear head_;
};

// labeled data the trainer consumes
struct LabeledSpecExample {
  Tensor input;  // [1,F,bins] network-oriented
  int label;
};

ClassifierTrainReport train_classifier(DigitClassifier& c,
                                       const std::vector<LabeledSpecExample>& data,
                                       const ClassifierTrainConfig& cfg, Rng& rng);

}  // namespace audioinv::clf
