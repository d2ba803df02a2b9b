#pragma once

#include <cstdint>
#include <string>

#include "audio/audio.hpp"
#include "classifier/classifier.hpp"
#include "gan/gan_train.hpp"
#include "gan/generator.hpp"
#include "invert/inverse_mapper.hpp"
#include "invert/invert.hpp"

namespace audioinv::exp {

// Everything an experiment run needs, resolvable from a profile name plus
// an optional JSON override file. The seed is recorded in every output.
struct ExperimentConfig {
  std::string profile = "toy";
  uint64_t seed = 1234;
  std::string out_dir = "runs/out";

  // audio geometry
  int64_t canonical_length = 4096;
  audio::SpectrogramConfig spec;

  // generator + adversarial training
  gan::GeneratorConfig gen;
  int critic_phase_shuffle_n = 2;
  gan::GanTrainConfig gan_train;

  // classifier
  int64_t num_classes = 10;
  clf::ResNetConfig clf_body;
  clf::ClassifierTrainConfig clf_train;

  // inverse mapper
  clf::ResNetConfig mapper_body;
  inv::InverterTrainConfig inverter_train;

  // inversion budgets
  inv::GdConfig gd;
  inv::GdConfig hybrid;

  // evaluation
  int64_t num_targets = 32;
  int workers = 1;
  int inception_splits = 10;
  int figure_count = 6;
  bool eval_use_heldout = true;

  // data
  std::string sc09_root;  // empty -> synthetic toy digits
  int toy_per_class = 24;
  double heldout_fraction = 0.1;

  // checkpoint locations
  std::string gan_ckpt;
  std::string classifier_ckpt;
  std::string mapper_ckpt;

  void validate() const;
  int64_t spec_frames() const { return spec.frames_for(canonical_length); }
  int64_t spec_bins() const { return spec.bins(); }
};

// Profile defaults: "toy" finishes on a laptop CPU, "full" mirrors the
// reference setup (latent 100, 16384-sample clips, 50000-step inversion,
// 250 inverter epochs).
ExperimentConfig default_config(const std::string& profile);

// defaults for cfg.profile (or file's "profile" key), overridden by the file
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);

void save_config(const ExperimentConfig& cfg, const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

// FNV-1a of the canonical JSON dump; stamped into result sidecars
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace audioinv::exp
