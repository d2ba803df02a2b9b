#include "classifier/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace audioinv::clf {

ag::Var perceptual_loss_var(const DigitClassifier& c, const ag::Var& a,
                            const ag::Var& b, bool mean_per_block) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument("perceptual_loss: shape mismatch " +
                                a->value.shape_str() + " vs " + b->value.shape_str());
  auto fa = c.features_var(a);
  auto fb = c.features_var(b);
  ag::Var total;
  for (size_t i = 0; i < fa.size(); ++i) {
    ag::Var d = ag::sub(fa[i], fb[i]);
    ag::Var block = mean_per_block
                        ? ag::mean_all(ag::square(d))
                        : ag::sum_sq(d);
    total = total ? ag::add(total, block) : block;
  }
  return ag::mul_scalar(total, 1.0f / static_cast<float>(fa.size()));
}

double perceptual_loss(const DigitClassifier& c, const audio::Spectrogram& a,
                       const audio::Spectrogram& b, bool mean_per_block) {
  ag::NoGradGuard ng;
  ag::Var av = ag::constant(DigitClassifier::spec_to_input(a));
  ag::Var bv = ag::constant(DigitClassifier::spec_to_input(b));
  return perceptual_loss_var(c, av, bv, mean_per_block)->value[0];
}

InceptionScore inception_score_from_probs(
    const std::vector<std::vector<double>>& probs, int splits) {
  if (probs.empty()) throw std::invalid_argument("inception_score: empty input");
  if (splits < 1 || static_cast<size_t>(splits) > probs.size())
    throw std::invalid_argument("inception_score: need |clips| >= splits >= 1");
  const size_t n = probs.size();
  const size_t c = probs[0].size();

  std::vector<double> scores;
  scores.reserve(static_cast<size_t>(splits));
  for (int s = 0; s < splits; ++s) {
    const size_t lo = n * static_cast<size_t>(s) / static_cast<size_t>(splits);
    const size_t hi = n * static_cast<size_t>(s + 1) / static_cast<size_t>(splits);
    std::vector<double> marginal(c, 0.0);
    for (size_t i = lo; i < hi; ++i)
      for (size_t j = 0; j < c; ++j) marginal[j] += probs[i][j];
    for (auto& m : marginal) m /= static_cast<double>(hi - lo);
    double mean_kl = 0.0;
    for (size_t i = lo; i < hi; ++i) {
      double kl = 0.0;
      for (size_t j = 0; j < c; ++j) {
        const double p = std::max(probs[i][j], 1e-12);
        const double q = std::max(marginal[j], 1e-12);
        kl += p * (std::log(p) - std::log(q));
      }
      mean_kl += kl;
    }
    mean_kl /= static_cast<double>(hi - lo);
    scores.push_back(std::exp(mean_kl));
  }

  InceptionScore out;
  for (double s : scores) out.mean += s;
  out.mean /= static_cast<double>(scores.size());
  double var = 0.0;
  for (double s : scores) var += (s - out.mean) * (s - out.mean);
  out.stddev = std::sqrt(var / static_cast<double>(scores.size()));
  return out;
}

InceptionScore inception_score(const DigitClassifier& c,
                               const std::vector<audio::AudioClip>& clips,
                               int splits, const audio::SpectrogramConfig& scfg) {
  if (clips.empty()) throw std::invalid_argument("inception_score: empty input");
  std::vector<std::vector<double>> probs;
  probs.reserve(clips.size());
  for (const auto& clip : clips)
    probs.push_back(c.classify(audio::spectrogram(clip, scfg)));
  return inception_score_from_probs(probs, splits);
}

double accuracy(const DigitClassifier& c,
                const std::vector<std::pair<audio::AudioClip, int>>& labeled,
                const audio::SpectrogramConfig& scfg) {
  if (labeled.empty()) throw std::invalid_argument("accuracy: empty set");
  int64_t correct = 0;
  for (const auto& [clip, label] : labeled) {
    auto p = c.classify(audio::spectrogram(clip, scfg));
    int64_t argmax = 0;
    for (size_t j = 1; j < p.size(); ++j)
      if (p[j] > p[static_cast<size_t>(argmax)]) argmax = static_cast<int64_t>(j);
    if (argmax == label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labeled.size());
}

}  // namespace audioinv::clf
