#pragma once

#include <utility>
#include <vector>

#include "audio/audio.hpp"
#include "classifier/classifier.hpp"

namespace audioinv::clf {

// Distance between classifier activations at each residual stage:
// per-stage mean squared activation difference, averaged across stages
// (set mean_per_block = false to sum squared differences per stage
// instead, for ablations).
double perceptual_loss(const DigitClassifier& c, const audio::Spectrogram& a,
                       const audio::Spectrogram& b, bool mean_per_block = true);

// differentiable form over batched network inputs [B,1,F,bins]
ag::Var perceptual_loss_var(const DigitClassifier& c, const ag::Var& a,
                            const ag::Var& b, bool mean_per_block = true);

struct InceptionScore {
  double mean = 0.0;
  double stddev = 0.0;
};

// exp(mean KL(p(y|x) || p_marginal)) per split; mean and population std over
// splits. Always lies in [1, num_classes].
InceptionScore inception_score(const DigitClassifier& c,
                               const std::vector<audio::AudioClip>& clips,
                               int splits, const audio::SpectrogramConfig& scfg);
// same, on precomputed class posteriors (one row per sample)
InceptionScore inception_score_from_probs(
    const std::vector<std::vector<double>>& probs, int splits);

// fraction of argmax matches
double accuracy(const DigitClassifier& c,
                const std::vector<std::pair<audio::AudioClip, int>>& labeled,
                const audio::SpectrogramConfig& scfg);

}  // namespace audioinv::clf
