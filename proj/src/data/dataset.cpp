#include "data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace audioinv::data {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const char* kDigitNames[10] = {"zero", "one", "two",   "three", "four",
                               "five", "six", "seven", "eight", "nine"};

constexpr double kPi = 3.14159265358979323846;

}  // namespace

std::vector<audio::AudioClip> LabeledDataset::clips_only() const {
  std::vector<audio::AudioClip> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.clip);
  return out;
}

std::vector<std::pair<audio::AudioClip, int>> LabeledDataset::labeled_pairs() const {
  std::vector<std::pair<audio::AudioClip, int>> out;
  out.reserve(items.size());
  for (const auto& it : items) out.emplace_back(it.clip, it.label);
  return out;
}

LabeledDataset load_sc09(const std::string& root, int64_t canonical_length) {
  if (!fs::is_directory(root))
    throw std::runtime_error("load_sc09: not a directory: " + root);

  std::map<std::string, int64_t> expected;
  const fs::path manifest = fs::path(root) / "manifest.json";
  if (fs::exists(manifest)) {
    std::ifstream is(manifest);
    json m = json::parse(is);
    for (auto& [k, v] : m.at("expected_counts").items())
      expected[k] = v.get<int64_t>();
  }

  LabeledDataset ds;
  ds.split_tag = "all";
  std::map<std::string, int64_t> counts;
  int classes_found = 0;
  for (int digit = 0; digit < 10; ++digit) {
    const fs::path dir = fs::path(root) / kDigitNames[digit];
    if (!fs::is_directory(dir)) continue;
    ++classes_found;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".wav")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        LabeledClip lc;
        lc.clip = audio::load_wav(f.string(), canonical_length);
        lc.label = digit;
        // SC09 names speakers as <id>_nohash_<take>.wav
        const std::string stem = f.stem().string();
        lc.speaker = stem.substr(0, stem.find('_'));
        ds.items.push_back(std::move(lc));
        ++counts[kDigitNames[digit]];
      } catch (const std::exception& e) {
        std::cerr << "load_sc09: skipping " << f << ": " << e.what() << "\n";
        ++ds.skipped_files;
      }
    }
  }
  if (classes_found == 0 || ds.items.empty())
    throw std::runtime_error("load_sc09: no classes found under " + root);

  for (const auto& [name, want] : expected) {
    const int64_t got = counts.count(name) ? counts[name] : 0;
    if (got != want)
      throw std::runtime_error("load_sc09: manifest expects " + std::to_string(want) +
                               " '" + name + "' clips, found " + std::to_string(got));
  }
  return ds;
}

std::pair<LabeledDataset, LabeledDataset> split_train_heldout(
    const LabeledDataset& all, double heldout_fraction, uint64_t seed) {
  if (all.items.empty()) throw std::invalid_argument("split: empty dataset");
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0))
    throw std::invalid_argument("split: fraction must be in (0,1)");

  LabeledDataset train, heldout;
  train.split_tag = "train";
  heldout.split_tag = "heldout";

  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < all.items.size(); ++i)
    by_class[all.items[i].label].push_back(i);

  Rng rng(seed);
  for (auto& [label, idx] : by_class) {
    for (size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.next_below(i)]);
    const size_t nh = std::max<size_t>(
        1, static_cast<size_t>(std::llround(heldout_fraction * idx.size())));
    for (size_t i = 0; i < idx.size(); ++i) {
      if (i < nh)
        heldout.items.push_back(all.items[idx[i]]);
      else
        train.items.push_back(all.items[idx[i]]);
    }
  }
  return {std::move(train), std::move(heldout)};
}

LabeledDataset make_toy_digits(int per_class, int64_t length, uint64_t seed) {
  if (per_class <= 0 || length <= 0)
    throw std::invalid_argument("make_toy_digits: bad sizes");
  LabeledDataset ds;
  ds.split_tag = "toy";
  Rng rng(seed);
  const double sr = audio::kSampleRate;
  for (int digit = 0; digit < 10; ++digit) {
    // each class owns a base tone plus a class-specific chirp direction
    const double f0 = 320.0 + 170.0 * digit;
    const double chirp = (digit % 2 == 0 ? 1.0 : -1.0) * (40.0 + 12.0 * digit);
    for (int i = 0; i < per_class; ++i) {
      const double jitter = rng.uniform(-0.02, 0.02);
      const double base = f0 * (1.0 + jitter);
      const double amp = rng.uniform(0.55, 0.9);
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      const double noise_amp = rng.uniform(0.005, 0.02);
      LabeledClip lc;
      lc.label = digit;
      lc.speaker = "toy" + std::to_string(i % 7);
      lc.clip.samples.resize(static_cast<size_t>(length));
      for (int64_t t = 0; t < length; ++t) {
        const double tt = static_cast<double>(t) / sr;
        const double dur = static_cast<double>(length) / sr;
        const double f_inst = base + chirp * tt / dur;
        // attack/decay envelope keeps instances inside [-1,1]
        const double env = std::sin(kPi * std::min(1.0, tt / dur));
        double v = std::sin(2.0 * kPi * f_inst * tt + phase);
        v += 0.35 * std::sin(2.0 * kPi * 2.31 * base * tt + 1.7 * phase);
        v = amp * env * v / 1.35;
        v += noise_amp * rng.uniform(-1.0, 1.0);
        lc.clip.samples[static_cast<size_t>(t)] = static_cast<float>(v);
      }
      ds.items.push_back(std::move(lc));
    }
  }
  return ds;
}

FakeBatchSource::Batch FakeBatchSource::next(Rng& rng) const {
  const int64_t d = g_.config().latent_dim;
  Batch b;
  b.latents = Tensor({batch_, d});
  for (int64_t i = 0; i < b.latents.numel(); ++i)
    b.latents[i] = rng.uniform_f(-1.0f, 1.0f);
  b.clips = g_.generate_batch(b.latents);
  return b;
}

}  // namespace audioinv::data
