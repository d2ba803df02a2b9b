#include "audio/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace audioinv::audio {

namespace {

constexpr double kPi = 3.14159265358979323846;
// keeps the magnitude gradient finite at exact silence without disturbing
// values near the log floor
constexpr float kMagTiny = 1e-14f;

uint32_t rd_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t rd_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

AudioClip fit_to_length(std::vector<float> samples, int64_t length) {
  samples.resize(static_cast<size_t>(length), 0.0f);
  float peak = 0.0f;
  for (float s : samples) {
    if (!std::isfinite(s)) throw std::runtime_error("audio: non-finite sample");
    peak = std::max(peak, std::fabs(s));
  }
  if (peak > 1.0f) {
    const float inv = 1.0f / peak;
    for (float& s : samples) s *= inv;
  }
  AudioClip clip;
  clip.samples = std::move(samples);
  return clip;
}

AudioClip load_wav(const std::string& path, int64_t canonical_length) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_wav: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("load_wav: not a RIFF/WAVE file: " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const unsigned char* data = nullptr;
  uint32_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const uint32_t chunk_len = rd_u32(buf.data() + pos + 4);
    const unsigned char* chunk = buf.data() + pos + 8;
    if (pos + 8 + chunk_len > buf.size())
      throw std::runtime_error("load_wav: truncated chunk in " + path);
    if (std::memcmp(buf.data() + pos, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw std::runtime_error("load_wav: bad fmt chunk");
      format = rd_u16(chunk);
      channels = rd_u16(chunk + 2);
      rate = rd_u32(chunk + 4);
      bits = rd_u16(chunk + 14);
    } else if (std::memcmp(buf.data() + pos, "data", 4) == 0) {
      data = chunk;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (data == nullptr) throw std::runtime_error("load_wav: no data chunk in " + path);
  if (channels != 1)
    throw std::runtime_error("load_wav: unsupported channel count " +
                             std::to_string(channels) + " in " + path);
  if (rate != static_cast<uint32_t>(kSampleRate))
    throw std::runtime_error("load_wav: sample rate " + std::to_string(rate) +
                             " != 16000 in " + path);

  std::vector<float> samples;
  if (format == 1 && bits == 16) {
    // same 1/32767 scale the writer uses, so a round trip stays within
    // half a quantization step
    const size_t n = data_len / 2;
    samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const int16_t v = static_cast<int16_t>(rd_u16(data + 2 * i));
      samples[i] = std::max(-1.0f, static_cast<float>(v) / 32767.0f);
    }
  } else if (format == 3 && bits == 32) {
    const size_t n = data_len / 4;
    samples.resize(n);
    std::memcpy(samples.data(), data, n * sizeof(float));
  } else {
    throw std::runtime_error("load_wav: unsupported encoding (format " +
                             std::to_string(format) + ", " + std::to_string(bits) +
                             " bit) in " + path);
  }
  return fit_to_length(std::move(samples), canonical_length);
}

void save_wav(const std::string& path, const AudioClip& clip) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_wav: cannot open " + path);
  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  const uint32_t data_len = n * 2;
  const uint32_t rate = static_cast<uint32_t>(clip.sample_rate);

  auto w16 = [&os](uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<char*>(b), 2);
  };
  auto w32 = [&os](uint32_t v) {
    unsigned char b[4] = {
        static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<char*>(b), 4);
  };

  os.write("RIFF", 4);
  w32(36 + data_len);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  w32(16);
  w16(1);  // PCM
  w16(1);  // mono
  w32(rate);
  w32(rate * 2);
  w16(2);
  w16(16);
  os.write("data", 4);
  w32(data_len);
  for (float s : clip.samples) {
    const float c = std::clamp(s, -1.0f, 1.0f);
    const int v = static_cast<int>(std::lrintf(c * 32767.0f));
    w16(static_cast<uint16_t>(static_cast<int16_t>(v)));
  }
  if (!os) throw std::runtime_error("save_wav: write failed for " + path);
}

void SpectrogramConfig::validate() const {
  if (window_size <= 0) throw std::invalid_argument("spectrogram: window_size must be > 0");
  if (hop <= 0 || hop > window_size)
    throw std::invalid_argument("spectrogram: need 0 < hop <= window_size");
  if (!(log_floor > 0.0f))
    throw std::invalid_argument("spectrogram: log_floor must be > 0");
}

DftBasis make_dft_basis(const SpectrogramConfig& cfg) {
  cfg.validate();
  const int64_t w = cfg.window_size;
  const int64_t bins = cfg.bins();
  DftBasis basis;
  basis.cos_basis = Tensor({w, bins});
  basis.sin_basis = Tensor({w, bins});
  for (int64_t t = 0; t < w; ++t) {
    // periodic Hann window
    const double hann =
        0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(t) / static_cast<double>(w));
    for (int64_t k = 0; k < bins; ++k) {
      const double ang = 2.0 * kPi * static_cast<double>(k) * static_cast<double>(t) /
                         static_cast<double>(w);
      basis.cos_basis.at(t, k) = static_cast<float>(hann * std::cos(ang));
      basis.sin_basis.at(t, k) = static_cast<float>(-hann * std::sin(ang));
    }
  }
  return basis;
}

ag::Var spectrogram_var(const ag::Var& wave, const SpectrogramConfig& cfg,
                        const DftBasis& basis) {
  cfg.validate();
  const int64_t batch = wave->value.dim(0);
  const int64_t len = wave->value.dim(1);
  if (cfg.window_size > len)
    throw std::invalid_argument("spectrogram: window longer than clip");
  const int64_t frames = cfg.frames_for(len);
  const int64_t bins = cfg.bins();

  ag::Var framed = ag::frame_signal(wave, cfg.window_size, cfg.hop);
  ag::Var flat = ag::reshape(framed, {batch * frames, cfg.window_size});
  ag::Var re = ag::matmul(flat, ag::constant(basis.cos_basis));
  ag::Var im = ag::matmul(flat, ag::constant(basis.sin_basis));
  ag::Var mag = ag::magnitude(re, im, kMagTiny);
  if (cfg.use_log) mag = ag::log_floor(mag, cfg.log_floor);
  return ag::reshape(mag, {batch, frames, bins});
}

Spectrogram spectrogram(const AudioClip& clip, const SpectrogramConfig& cfg) {
  ag::NoGradGuard ng;
  const DftBasis basis = make_dft_basis(cfg);
  Tensor wave({1, clip.length()}, clip.samples);
  ag::Var s = spectrogram_var(ag::constant(std::move(wave)), cfg, basis);
  const int64_t frames = s->value.dim(1);
  const int64_t bins = s->value.dim(2);
  Spectrogram out;
  out.values = Tensor({bins, frames});
  for (int64_t f = 0; f < frames; ++f)
    for (int64_t k = 0; k < bins; ++k)
      out.values.at(k, f) = s->value[f * bins + k];
  return out;
}

double mse_raw(const AudioClip& a, const AudioClip& b) {
  if (a.length() != b.length())
    throw std::invalid_argument("mse_raw: length mismatch " +
                                std::to_string(a.length()) + " vs " +
                                std::to_string(b.length()));
  double acc = 0.0;
  for (size_t i = 0; i < a.samples.size(); ++i) {
    const double d = static_cast<double>(a.samples[i]) - static_cast<double>(b.samples[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.samples.size());
}

double ssim(const Tensor& a, const Tensor& b, const SsimConfig& cfg) {
  if (!a.same_shape(b))
    throw std::invalid_argument("ssim: shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
  if (a.ndim() != 2) throw std::invalid_argument("ssim: expects 2-D inputs");
  const int64_t h = a.dim(0), w = a.dim(1);
  const int win = cfg.window;
  if (h < win || w < win)
    throw std::invalid_argument("ssim: inputs smaller than window");

  double mn = a[0], mx = a[0];
  for (int64_t i = 0; i < a.numel(); ++i) {
    mn = std::min({mn, static_cast<double>(a[i]), static_cast<double>(b[i])});
    mx = std::max({mx, static_cast<double>(a[i]), static_cast<double>(b[i])});
  }
  const double range = mx - mn;
  if (range == 0.0) return 1.0;  // both constant and equal

  const double c1 = (cfg.k1 * range) * (cfg.k1 * range);
  const double c2 = (cfg.k2 * range) * (cfg.k2 * range);
  const double inv_n = 1.0 / static_cast<double>(win * win);

  double total = 0.0;
  int64_t count = 0;
  for (int64_t i = 0; i + win <= h; ++i) {
    for (int64_t j = 0; j + win <= w; ++j) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int di = 0; di < win; ++di) {
        const float* ra = a.data() + (i + di) * w + j;
        const float* rb = b.data() + (i + di) * w + j;
        for (int dj = 0; dj < win; ++dj) {
          const double va = ra[dj], vb = rb[dj];
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      }
      const double mu_a = sa * inv_n;
      const double mu_b = sb * inv_n;
      const double var_a = saa * inv_n - mu_a * mu_a;
      const double var_b = sbb * inv_n - mu_b * mu_b;
      const double cov = sab * inv_n - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
      const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      total += std::clamp(num / den, -1.0, 1.0);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double ssim(const Spectrogram& a, const Spectrogram& b, const SsimConfig& cfg) {
  return ssim(a.values, b.values, cfg);
}

void write_pgm(const std::string& path, const Tensor& image, bool flip_rows) {
  if (image.ndim() != 2) throw std::invalid_argument("write_pgm: expects 2-D image");
  const int64_t h = image.dim(0), w = image.dim(1);
  float mn = image[0], mx = image[0];
  for (int64_t i = 0; i < image.numel(); ++i) {
    mn = std::min(mn, image[i]);
    mx = std::max(mx, image[i]);
  }
  const float scale = mx > mn ? 255.0f / (mx - mn) : 0.0f;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
  os << "P5\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(w));
  for (int64_t i = 0; i < h; ++i) {
    const int64_t src = flip_rows ? h - 1 - i : i;
    for (int64_t j = 0; j < w; ++j)
      row[static_cast<size_t>(j)] =
          static_cast<unsigned char>(std::lround((image.at(src, j) - mn) * scale));
    os.write(reinterpret_cast<const char*>(row.data()), w);
  }
  if (!os) throw std::runtime_error("write_pgm: write failed for " + path);
}

}  // namespace audioinv::audio
