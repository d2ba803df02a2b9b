#pragma once

#include <string>
#include <vector>

#include "audio/audio.hpp"
#include "core/rng.hpp"
#include "gan/generator.hpp"

namespace audioinv::inv {

enum class ClipMode { None, Hard, Stochastic };

ClipMode clip_mode_from_string(const std::string& s);
std::string to_string(ClipMode m);

// In-range components pass through untouched; out-of-range components are
// replaced by fresh uniform draws on [lo, hi].
std::vector<float> stochastic_clip(const std::vector<float>& z, float lo, float hi,
                                   Rng& rng);

struct GdConfig {
  int64_t max_steps = 50000;
  ClipMode clip_mode = ClipMode::None;
  bool log_spectrogram = true;  // objective on log or linear magnitudes
  double tol_obj = 1e-8;
  int history = 10;
  bool has_init = false;
  std::vector<float> init;
  // When the quasi-Newton loop stalls in a poor basin with budget left,
  // draw a fresh uniform z* and keep going (best-so-far preserved).
  // Refinement of a provided init (hybrid) runs with this off.
  bool restart_on_stall = true;

  void validate() const;
};

struct InversionResult {
  std::vector<float> z_hat;
  audio::AudioClip reconstruction;  // generate(g, z_hat), bitwise
  std::vector<double> loss_trace;   // best-so-far objective, entry 0 = init
  std::vector<double> raw_trace;    // objective at each accepted iterate
  int64_t steps_used = 0;           // step index of the returned z (earliest best)
  int64_t restarts = 0;
  double wall_time_sec = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::string method;
  std::string stop_reason;
};

// Eq-style spectrogram-matching inversion: minimize the mean absolute
// difference between the target spectrogram and the spectrogram of
// generate(g, z) with a limited-memory quasi-Newton loop. Starts from a
// uniform random z unless cfg carries an init.
InversionResult invert_gd(const gan::Generator& g, const audio::AudioClip& target,
                          const GdConfig& cfg, Rng& rng,
                          const audio::SpectrogramConfig& scfg);

// JSON sidecar next to a reconstruction WAV
void write_result_sidecar(const std::string& path, const InversionResult& result,
                          uint64_t seed, const std::string& config_hash);

}  // namespace audioinv::inv
