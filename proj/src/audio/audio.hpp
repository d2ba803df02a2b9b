#pragma once

#include <string>
#include <vector>

#include "core/autograd.hpp"
#include "core/tensor.hpp"

namespace audioinv::audio {

constexpr int kSampleRate = 16000;
constexpr int kDefaultClipLength = 16384;

// Fixed-length mono waveform at 16 kHz, samples in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  int64_t length() const { return static_cast<int64_t>(samples.size()); }
};

// Pad with trailing zeros or truncate to `length`, then clamp-normalize:
// if max |sample| exceeds 1 the clip is rescaled to peak 1.
AudioClip fit_to_length(std::vector<float> samples, int64_t length);

// RIFF/WAVE reader. Accepts mono PCM 16-bit and IEEE float 32-bit at 16 kHz;
// anything else (other encodings, channel counts, rates) is rejected.
AudioClip load_wav(const std::string& path, int64_t canonical_length);
// 16-bit PCM writer.
void save_wav(const std::string& path, const AudioClip& clip);

struct SpectrogramConfig {
  int window_size = 256;
  int hop = 128;
  float log_floor = 1e-6f;
  bool use_log = true;

  void validate() const;
  int64_t frames_for(int64_t clip_length) const {
    return 1 + (clip_length - window_size) / hop;
  }
  int64_t bins() const { return window_size / 2 + 1; }
};

// Magnitude image, rows = frequency bins, cols = frames.
struct Spectrogram {
  Tensor values;  // [bins, frames]
  int64_t n_elements() const { return values.numel(); }
  int64_t bins() const { return values.dim(0); }
  int64_t frames() const { return values.dim(1); }
};

// Hann-windowed DFT basis for the config; rows index within-window time,
// columns frequency bins. Window is folded into the basis.
struct DftBasis {
  Tensor cos_basis;  // [window, bins]
  Tensor sin_basis;  // [window, bins]
};
DftBasis make_dft_basis(const SpectrogramConfig& cfg);

// Differentiable spectrogram: wave[B,L] -> [B, frames, bins] (frame-major;
// the public Spectrogram type is the transposed single-clip view).
ag::Var spectrogram_var(const ag::Var& wave, const SpectrogramConfig& cfg,
                        const DftBasis& basis);

Spectrogram spectrogram(const AudioClip& clip, const SpectrogramConfig& cfg);

// --- reconstruction metrics ---------------------------------------------------

// mean squared sample difference
double mse_raw(const AudioClip& a, const AudioClip& b);

// Mean local structural similarity over all fully-interior windows.
// Uniform window, k1/k2 stabilizers; dynamic range taken over both inputs
// so the measure stays symmetric.
struct SsimConfig {
  int window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
};
double ssim(const Spectrogram& a, const Spectrogram& b, const SsimConfig& cfg = {});
double ssim(const Tensor& a, const Tensor& b, const SsimConfig& cfg = {});

// --- image export -------------------------------------------------------------

// Binary PGM (P5), values min-max scaled to 0..255. Rows are flipped so low
// frequencies sit at the bottom of the image.
void write_pgm(const std::string& path, const Tensor& image, bool flip_rows = true);

}  // namespace audioinv::audio
