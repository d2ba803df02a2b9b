#include "exp/figures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace audioinv::exp {

Tensor render_waveform(const audio::AudioClip& clip, int64_t height, int64_t width) {
  Tensor img({height, width});
  const int64_t n = clip.length();
  for (int64_t x = 0; x < width; ++x) {
    const int64_t lo = x * n / width;
    const int64_t hi = std::max(lo + 1, (x + 1) * n / width);
    float mn = 1.0f, mx = -1.0f;
    for (int64_t i = lo; i < hi && i < n; ++i) {
      mn = std::min(mn, clip.samples[static_cast<size_t>(i)]);
      mx = std::max(mx, clip.samples[static_cast<size_t>(i)]);
    }
    // map [-1,1] to rows, row 0 at +1
    const int64_t r0 = std::clamp<int64_t>(
        static_cast<int64_t>((1.0f - mx) * 0.5f * static_cast<float>(height - 1)), 0,
        height - 1);
    const int64_t r1 = std::clamp<int64_t>(
        static_cast<int64_t>((1.0f - mn) * 0.5f * static_cast<float>(height - 1)), 0,
        height - 1);
    for (int64_t r = r0; r <= r1; ++r) img.at(r, x) = 1.0f;
  }
  return img;
}

void write_comparison_figure(const std::string& path,
                             const std::vector<audio::AudioClip>& clips,
                             const audio::SpectrogramConfig& scfg) {
  if (clips.empty()) throw std::invalid_argument("figure: no clips");
  const int64_t margin = 4;

  std::vector<Tensor> specs;
  specs.reserve(clips.size());
  for (const auto& c : clips) specs.push_back(audio::spectrogram(c, scfg).values);
  const int64_t sh = specs[0].dim(0);
  const int64_t sw = specs[0].dim(1);

  // waveform panels share the spectrogram width so columns line up
  const int64_t wh = std::max<int64_t>(48, sh / 2);
  const int64_t cols = static_cast<int64_t>(clips.size());
  const int64_t panel_w = sw;
  const int64_t total_w = cols * panel_w + (cols + 1) * margin;
  const int64_t total_h = wh + sh + 3 * margin;

  Tensor canvas({total_h, total_w});
  for (int64_t i = 0; i < canvas.numel(); ++i) canvas[i] = 0.15f;  // frame tone

  auto blit = [&](const Tensor& src, int64_t top, int64_t left, float lo, float hi) {
    const float inv = hi > lo ? 1.0f / (hi - lo) : 0.0f;
    for (int64_t r = 0; r < src.dim(0); ++r)
      for (int64_t c = 0; c < src.dim(1); ++c)
        canvas.at(top + r, left + c) = (src.at(r, c) - lo) * inv;
  };

  for (int64_t k = 0; k < cols; ++k) {
    const int64_t left = margin + k * (panel_w + margin);
    Tensor wf = render_waveform(clips[static_cast<size_t>(k)], wh, panel_w);
    blit(wf, margin, left, 0.0f, 1.0f);

    // flip so low frequencies render at the bottom
    Tensor spec = specs[static_cast<size_t>(k)];
    float mn = spec[0], mx = spec[0];
    for (int64_t i = 0; i < spec.numel(); ++i) {
      mn = std::min(mn, spec[i]);
      mx = std::max(mx, spec[i]);
    }
    Tensor flipped({sh, sw});
    for (int64_t r = 0; r < sh; ++r)
      for (int64_t c = 0; c < sw; ++c) flipped.at(r, c) = spec.at(sh - 1 - r, c);
    blit(flipped, wh + 2 * margin, left, mn, mx);
  }
  audio::write_pgm(path, canvas, /*flip_rows=*/false);
}

}  // namespace audioinv::exp
