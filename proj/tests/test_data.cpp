#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "data/dataset.hpp"

using namespace audioinv;
using namespace audioinv::data;

namespace fs = std::filesystem;

namespace {

fs::path make_sc09_tree(int per_class, int classes = 10) {
  static int counter = 0;
  fs::path root = fs::temp_directory_path() /
                  ("audioinv_sc09_" + std::to_string(counter++));
  fs::remove_all(root);
  const char* names[10] = {"zero", "one", "two",   "three", "four",
                           "five", "six", "seven", "eight", "nine"};
  Rng rng(3);
  for (int d = 0; d < classes; ++d) {
    fs::create_directories(root / names[d]);
    for (int i = 0; i < per_class; ++i) {
      audio::AudioClip clip;
      clip.samples.resize(8000);
      for (auto& s : clip.samples) s = rng.uniform_f(-0.5f, 0.5f);
      audio::save_wav((root / names[d] /
                       ("spk" + std::to_string(i) + "_nohash_0.wav")).string(),
                      clip);
    }
  }
  return root;
}

}  // namespace

TEST_CASE("load_sc09: labels from folders, padding, speaker ids") {
  fs::path root = make_sc09_tree(3);
  LabeledDataset ds = load_sc09(root.string(), 16384);
  REQUIRE(ds.items.size() == 30);
  std::set<int> labels;
  for (const auto& item : ds.items) {
    labels.insert(item.label);
    CHECK(item.clip.length() == 16384);
    CHECK(item.clip.samples[16000] == 0.0f);  // zero-padded tail
    CHECK(item.speaker.substr(0, 3) == "spk");
  }
  CHECK(labels.size() == 10);

  // empty directory -> no classes found
  fs::path empty = fs::temp_directory_path() / "audioinv_sc09_empty";
  fs::create_directories(empty);
  CHECK_THROWS_WITH_AS(load_sc09(empty.string(), 16384),
                       doctest::Contains("no classes"), std::runtime_error);
}

TEST_CASE("load_sc09: manifest counts enforced, bad files skipped") {
  fs::path root = make_sc09_tree(2);
  {
    std::ofstream os(root / "manifest.json");
    os << R"({"expected_counts": {"zero": 2, "one": 2}})";
  }
  LabeledDataset ds = load_sc09(root.string(), 4096);
  CHECK(ds.items.size() == 20);

  {
    std::ofstream os(root / "manifest.json");
    os << R"({"expected_counts": {"zero": 5}})";
  }
  CHECK_THROWS(load_sc09(root.string(), 4096));

  // corrupt file is skipped and counted
  fs::remove(root / "manifest.json");
  {
    std::ofstream os(root / "two" / "broken_nohash_0.wav");
    os << "not a wav";
  }
  LabeledDataset ds2 = load_sc09(root.string(), 4096);
  CHECK(ds2.items.size() == 20);
  CHECK(ds2.skipped_files == 1);
}

TEST_CASE("split: deterministic, disjoint, stratified") {
  LabeledDataset ds = make_toy_digits(20, 1024, 7);
  auto [train1, held1] = split_train_heldout(ds, 0.1, 99);
  auto [train2, held2] = split_train_heldout(ds, 0.1, 99);
  REQUIRE(held1.items.size() == 20);  // 10% of 20 per class = 2 each
  CHECK(train1.items.size() + held1.items.size() == ds.items.size());

  auto key = [](const LabeledClip& c) {
    return std::make_pair(c.label, c.clip.samples[100]);
  };
  std::set<std::pair<int, float>> ka, kb;
  for (const auto& c : held1.items) ka.insert(key(c));
  for (const auto& c : held2.items) kb.insert(key(c));
  CHECK(ka == kb);  // same seed, same split

  std::set<std::pair<int, float>> kt;
  for (const auto& c : train1.items) kt.insert(key(c));
  for (const auto& k : ka) CHECK(kt.count(k) == 0);  // disjoint
}

TEST_CASE("toy digits: deterministic, labeled, in range") {
  LabeledDataset a = make_toy_digits(4, 1024, 42);
  LabeledDataset b = make_toy_digits(4, 1024, 42);
  REQUIRE(a.items.size() == 40);
  for (size_t i = 0; i < a.items.size(); ++i) {
    CHECK(a.items[i].clip.samples == b.items[i].clip.samples);
    CHECK(a.items[i].label == static_cast<int>(i / 4));
    for (float s : a.items[i].clip.samples) CHECK(std::fabs(s) <= 1.0f);
  }
}

TEST_CASE("fake batch source pairs latents with clips bitwise") {
  gan::GeneratorConfig gcfg;
  gcfg.latent_dim = 4;
  gcfg.model_dim = 2;
  gcfg.output_length = 1024;
  gan::Generator g(gcfg, 23);
  FakeBatchSource src(g, 4);

  Rng r1(6), r2(6);
  auto b1 = src.next(r1);
  auto b2 = src.next(r2);
  REQUIRE(b1.latents.dim(0) == 4);
  for (int64_t i = 0; i < b1.latents.numel(); ++i) {
    CHECK(b1.latents[i] == b2.latents[i]);  // same seed, same batch
    CHECK(b1.latents[i] >= -1.0f);
    CHECK(b1.latents[i] <= 1.0f);
  }

  for (int64_t b = 0; b < 4; ++b) {
    gan::LatentVector z;
    z.values.assign(b1.latents.data() + b * 4, b1.latents.data() + (b + 1) * 4);
    audio::AudioClip c = g.generate(z);
    for (int64_t t = 0; t < 1024; ++t)
      CHECK(c.samples[static_cast<size_t>(t)] == b1.clips[b * 1024 + t]);
  }
}
