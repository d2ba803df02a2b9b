#pragma once

#include <string>
#include <vector>

#include "audio/audio.hpp"

namespace audioinv::exp {

// Comparison grid, one column per clip (target first, then each method's
// reconstruction), waveform row on top of spectrogram row. PGM output.
void write_comparison_figure(const std::string& path,
                             const std::vector<audio::AudioClip>& clips,
                             const audio::SpectrogramConfig& scfg);

// oscillogram raster of one clip (min/max column fill)
Tensor render_waveform(const audio::AudioClip& clip, int64_t height, int64_t width);

}  // namespace audioinv::exp
