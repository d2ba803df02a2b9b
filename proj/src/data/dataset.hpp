#pragma once

#include <string>
#include <utility>
#include <vector>

#include "audio/audio.hpp"
#include "core/rng.hpp"
#include "gan/generator.hpp"

namespace audioinv::data {

struct LabeledClip {
  audio::AudioClip clip;
  int label = 0;  // 0..9, from the digit folder name
  std::string speaker;
};

struct LabeledDataset {
  std::vector<LabeledClip> items;
  std::string split_tag;
  int64_t skipped_files = 0;

  std::vector<audio::AudioClip> clips_only() const;
  std::vector<std::pair<audio::AudioClip, int>> labeled_pairs() const;
};

// Directory layout root/<zero..nine>/<file>.wav. Labels come from folder
// names; unreadable files are skipped with a warning and counted. When
// root/manifest.json carries expected per-class counts they are enforced.
LabeledDataset load_sc09(const std::string& root, int64_t canonical_length);

// Deterministic stratified split; `heldout_fraction` of each class goes to
// the second set.
std::pair<LabeledDataset, LabeledDataset> split_train_heldout(
    const LabeledDataset& all, double heldout_fraction, uint64_t seed);

// Synthetic spoken-digit stand-ins: ten spectrally distinct chirp/harmonic
// templates with per-instance jitter and noise. Deterministic in (seed).
LabeledDataset make_toy_digits(int per_class, int64_t length, uint64_t seed);

// Run-time fake data: every batch pairs latents with generate(g, z) exactly.
class FakeBatchSource {
 public:
  FakeBatchSource(const gan::Generator& g, int64_t batch_size)
      : g_(g), batch_(batch_size) {}

  struct Batch {
    Tensor latents;  // [B,d]
    Tensor clips;    // [B,L]
  };
  Batch next(Rng& rng) const;

  int64_t batch_size() const { return batch_; }

 private:
  const gan::Generator& g_;
  int64_t batch_;
};

}  // namespace audioinv::data
