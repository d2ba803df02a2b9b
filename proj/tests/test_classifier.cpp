#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "classifier/metrics.hpp"
#include "data/dataset.hpp"

using namespace audioinv;
using namespace audioinv::clf;

namespace {

// spectrogram geometry for 1024-sample clips with the default 256/128 config
ResNetConfig tiny_body() {
  ResNetConfig cfg;
  cfg.width = 4;
  cfg.blocks_per_stage = 1;
  cfg.in_h = 7;
  cfg.in_w = 129;
  return cfg;
}

audio::SpectrogramConfig tiny_spec() { return audio::SpectrogramConfig{}; }

std::vector<LabeledSpecExample> spec_examples(const data::LabeledDataset& ds,
                                              const audio::SpectrogramConfig& scfg) {
  std::vector<LabeledSpecExample> out;
  for (const auto& item : ds.items) {
    Tensor in = DigitClassifier::spec_to_input(audio::spectrogram(item.clip, scfg));
    out.push_back({in.reshaped({1, in.dim(2), in.dim(3)}), item.label});
  }
  return out;
}

}  // namespace

TEST_CASE("classify: probabilities sum to one, deterministic, 4 feature taps") {
  DigitClassifier c(tiny_body(), 10, 3);
  data::LabeledDataset ds = data::make_toy_digits(1, 1024, 8);
  audio::Spectrogram s = audio::spectrogram(ds.items[0].clip, tiny_spec());

  auto p1 = c.classify(s);
  REQUIRE(p1.size() == 10);
  double sum = std::accumulate(p1.begin(), p1.end(), 0.0);
  CHECK(std::fabs(sum - 1.0) <= 1e-6);
  for (double v : p1) CHECK(v >= 0.0);

  auto p2 = c.classify(s);
  CHECK(p1 == p2);

  auto taps = c.features(s);
  REQUIRE(taps.size() == 4);
  auto taps2 = c.features(s);
  for (size_t i = 0; i < taps.size(); ++i)
    for (int64_t j = 0; j < taps[i].numel(); ++j) CHECK(taps[i][j] == taps2[i][j]);

  // zero spectrogram vs a one-hot-pixel spectrogram must differ somewhere
  audio::Spectrogram z0;
  z0.values = Tensor({129, 7});
  audio::Spectrogram z1;
  z1.values = Tensor({129, 7});
  z1.values[40] = 5.0f;
  auto fa = c.features(z0);
  auto fb = c.features(z1);
  bool any_diff = false;
  for (size_t i = 0; i < fa.size(); ++i)
    for (int64_t j = 0; j < fa[i].numel(); ++j)
      if (fa[i][j] != fb[i][j]) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("perceptual loss: identity, symmetry, direct-formula oracle") {
  DigitClassifier c(tiny_body(), 10, 5);
  data::LabeledDataset ds = data::make_toy_digits(1, 1024, 9);
  audio::Spectrogram a = audio::spectrogram(ds.items[0].clip, tiny_spec());
  audio::Spectrogram b = audio::spectrogram(ds.items[5].clip, tiny_spec());

  CHECK(perceptual_loss(c, a, a) == 0.0);
  CHECK(perceptual_loss(c, a, b) == doctest::Approx(perceptual_loss(c, b, a)).epsilon(1e-9));
  CHECK(perceptual_loss(c, a, b) > 0.0);

  // oracle: block-wise mean squared difference averaged over blocks
  auto fa = c.features(a);
  auto fb = c.features(b);
  double expect = 0.0;
  for (size_t i = 0; i < fa.size(); ++i) {
    double block = 0.0;
    for (int64_t j = 0; j < fa[i].numel(); ++j) {
      const double d = static_cast<double>(fa[i][j]) - static_cast<double>(fb[i][j]);
      block += d * d;
    }
    expect += block / static_cast<double>(fa[i].numel());
  }
  expect /= static_cast<double>(fa.size());
  CHECK(std::fabs(perceptual_loss(c, a, b) - expect) <= 1e-6 * std::max(1.0, expect));

  audio::Spectrogram wrong;
  wrong.values = Tensor({10, 10});
  CHECK_THROWS(perceptual_loss(c, a, wrong));
}

TEST_CASE("inception score: analytic cases and bounds") {
  // uniform posteriors -> KL 0 -> score exactly 1
  std::vector<std::vector<double>> uniform(40, std::vector<double>(10, 0.1));
  InceptionScore s1 = inception_score_from_probs(uniform, 10);
  CHECK(std::fabs(s1.mean - 1.0) <= 1e-6);
  CHECK(s1.stddev <= 1e-9);

  // perfectly confident and balanced -> num_classes
  std::vector<std::vector<double>> confident;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> p(10, 0.0);
    p[static_cast<size_t>(i) % 10] = 1.0;
    confident.push_back(p);
  }
  InceptionScore s2 = inception_score_from_probs(confident, 4);
  CHECK(std::fabs(s2.mean - 10.0) <= 1e-6);

  CHECK_THROWS(inception_score_from_probs({}, 1));
  CHECK_THROWS(inception_score_from_probs(uniform, 41));

  // clip-level path stays within [1, num_classes]
  DigitClassifier c(tiny_body(), 10, 7);
  data::LabeledDataset ds = data::make_toy_digits(2, 1024, 10);
  InceptionScore s3 = inception_score(c, ds.clips_only(), 5, tiny_spec());
  CHECK(s3.mean >= 1.0);
  CHECK(s3.mean <= 10.0);
}

TEST_CASE("training separable tones reaches high held-out accuracy") {
  // two spectrally distinct classes from the toy digit bank
  data::LabeledDataset full = data::make_toy_digits(24, 1024, 33);
  data::LabeledDataset twoclass;
  for (auto& item : full.items)
    if (item.label <= 1) twoclass.items.push_back(item);

  DigitClassifier c(tiny_body(), 2, 11);
  ClassifierTrainConfig tcfg;
  tcfg.steps = 120;
  tcfg.batch_size = 8;
  Rng rng(21);
  auto examples = spec_examples(twoclass, tiny_spec());
  ClassifierTrainReport report = train_classifier(c, examples, tcfg, rng);
  CHECK(report.heldout_accuracy > 0.9);

  // accuracy ordering: permuted labels cannot beat the true ones
  auto pairs = twoclass.labeled_pairs();
  const double acc_true = accuracy(c, pairs, tiny_spec());
  for (auto& [clip, label] : pairs) label = 1 - label;
  const double acc_perm = accuracy(c, pairs, tiny_spec());
  CHECK(acc_true > acc_perm);
}

TEST_CASE("relabeled uniform noise trains to chance accuracy") {
  Rng noise_rng(44);
  data::LabeledDataset ds;
  for (int i = 0; i < 80; ++i) {
    data::LabeledClip lc;
    lc.label = i % 4;
    lc.clip.samples.resize(1024);
    for (auto& s : lc.clip.samples) s = noise_rng.uniform_f(-0.5f, 0.5f);
    ds.items.push_back(std::move(lc));
  }
  DigitClassifier c(tiny_body(), 4, 13);
  ClassifierTrainConfig tcfg;
  tcfg.steps = 60;
  tcfg.batch_size = 8;
  tcfg.heldout_fraction = 0.25;
  Rng rng(3);
  auto report = train_classifier(c, spec_examples(ds, tiny_spec()), tcfg, rng);
  CHECK(report.heldout_accuracy <= 0.25 + 0.2);  // chance 1/4 within slack

  // empty class rejected
  data::LabeledDataset oneclass;
  for (int i = 0; i < 4; ++i) oneclass.items.push_back(ds.items[static_cast<size_t>(i * 4)]);
  for (auto& item : oneclass.items) item.label = 0;
  DigitClassifier c2(tiny_body(), 4, 13);
  CHECK_THROWS(train_classifier(c2, spec_examples(oneclass, tiny_spec()), tcfg, rng));
}

TEST_CASE("classifier checkpoint round-trips") {
  auto dir = std::filesystem::temp_directory_path() / "audioinv_clf_ckpt";
  std::filesystem::remove_all(dir);
  DigitClassifier c(tiny_body(), 10, 17);
  c.save_checkpoint(dir.string());
  DigitClassifier c2 = DigitClassifier::load_checkpoint(dir.string());

  data::LabeledDataset ds = data::make_toy_digits(1, 1024, 3);
  audio::Spectrogram s = audio::spectrogram(ds.items[2].clip, tiny_spec());
  CHECK(c.classify(s) == c2.classify(s));
}
