#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "audio/audio.hpp"
#include "core/rng.hpp"

using namespace audioinv;
using namespace audioinv::audio;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::filesystem::path temp_dir() {
  auto p = std::filesystem::temp_directory_path() / "audioinv_test_audio";
  std::filesystem::create_directories(p);
  return p;
}

// minimal stereo PCM16 writer for the rejection test
void write_stereo_wav(const std::string& path, int n) {
  std::ofstream os(path, std::ios::binary);
  auto w16 = [&os](uint16_t v) {
    unsigned char b[2] = {(unsigned char)v, (unsigned char)(v >> 8)};
    os.write((char*)b, 2);
  };
  auto w32 = [&os](uint32_t v) {
    unsigned char b[4] = {(unsigned char)v, (unsigned char)(v >> 8),
                          (unsigned char)(v >> 16), (unsigned char)(v >> 24)};
    os.write((char*)b, 4);
  };
  os.write("RIFF", 4);
  w32(36 + n * 4);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  w32(16);
  w16(1);
  w16(2);  // stereo
  w32(16000);
  w32(16000 * 4);
  w16(4);
  w16(16);
  os.write("data", 4);
  w32(n * 4);
  for (int i = 0; i < 2 * n; ++i) w16(0);
}

// direct DFT of one Hann-windowed frame, the oracle for the spectrogram path
std::vector<double> dft_frame_oracle(const std::vector<float>& x, int window) {
  const int bins = window / 2 + 1;
  std::vector<double> mag(bins);
  for (int k = 0; k < bins; ++k) {
    double re = 0, im = 0;
    for (int t = 0; t < window; ++t) {
      const double hann = 0.5 - 0.5 * std::cos(2.0 * kPi * t / window);
      const double ang = 2.0 * kPi * k * t / window;
      re += hann * x[t] * std::cos(ang);
      im -= hann * x[t] * std::sin(ang);
    }
    mag[k] = std::sqrt(re * re + im * im);
  }
  return mag;
}

}  // namespace

TEST_CASE("load_wav pads, truncates, and round-trips within 16-bit error") {
  auto dir = temp_dir();

  AudioClip clip;
  Rng rng(5);
  clip.samples.resize(16000);
  for (auto& s : clip.samples) s = rng.uniform_f(-1.0f, 1.0f);

  const std::string p = (dir / "mono16k.wav").string();
  save_wav(p, clip);

  // 16000-sample file padded to 16384 with trailing zeros
  AudioClip loaded = load_wav(p, 16384);
  REQUIRE(loaded.length() == 16384);
  for (int i = 16000; i < 16384; ++i) CHECK(loaded.samples[i] == 0.0f);
  for (int i = 0; i < 16000; ++i)
    CHECK(std::fabs(loaded.samples[i] - clip.samples[i]) <= std::pow(2.0f, -15.0f));

  // 20000-sample file truncated to the first 16384
  AudioClip longclip;
  longclip.samples.assign(20000, 0.25f);
  const std::string p2 = (dir / "long.wav").string();
  save_wav(p2, longclip);
  AudioClip t = load_wav(p2, 16384);
  REQUIRE(t.length() == 16384);
  CHECK(t.samples[16383] == doctest::Approx(0.25f).epsilon(1e-3));

  CHECK_THROWS(load_wav((dir / "missing.wav").string(), 16384));

  const std::string p3 = (dir / "stereo.wav").string();
  write_stereo_wav(p3, 64);
  CHECK_THROWS_WITH_AS(load_wav(p3, 16384),
                       doctest::Contains("unsupported channel count"),
                       std::runtime_error);
}

TEST_CASE("spectrogram: silence, frame count, 440 Hz peak bin") {
  SpectrogramConfig cfg;  // 256/128, log floor 1e-6

  AudioClip silent;
  silent.samples.assign(16384, 0.0f);
  Spectrogram s = spectrogram(silent, cfg);
  CHECK(s.frames() == 127);  // 1 + (16384-256)/128
  CHECK(s.bins() == 129);
  const float expect = std::log(1e-6f);
  for (int64_t i = 0; i < s.values.numel(); ++i) CHECK(s.values[i] == expect);

  // 440 Hz sine: peak bin round(440*256/16000) = 7
  AudioClip sine;
  sine.samples.resize(16384);
  for (int i = 0; i < 16384; ++i)
    sine.samples[i] = static_cast<float>(std::sin(2.0 * kPi * 440.0 * i / 16000.0));
  Spectrogram ss = spectrogram(sine, cfg);
  for (int64_t f = 0; f < ss.frames(); ++f) {
    int64_t argmax = 0;
    for (int64_t k = 1; k < ss.bins(); ++k)
      if (ss.values.at(k, f) > ss.values.at(argmax, f)) argmax = k;
    CHECK(argmax == 7);
  }

  // against the direct-DFT oracle on the first frame (linear magnitudes)
  SpectrogramConfig lin = cfg;
  lin.use_log = false;
  Spectrogram sl = spectrogram(sine, lin);
  auto oracle = dft_frame_oracle(sine.samples, 256);
  for (int k = 0; k < 129; ++k) {
    const double got = sl.values.at(k, 0);
    CHECK(std::fabs(got - oracle[k]) <= 1e-3 * std::max(1.0, oracle[k]));
  }

  // determinism: bitwise equal across calls
  Spectrogram s2 = spectrogram(sine, cfg);
  Spectrogram s3 = spectrogram(sine, cfg);
  for (int64_t i = 0; i < s2.values.numel(); ++i) CHECK(s2.values[i] == s3.values[i]);

  // window longer than clip
  AudioClip shortclip;
  shortclip.samples.assign(128, 0.0f);
  CHECK_THROWS(spectrogram(shortclip, cfg));
}

TEST_CASE("mse_raw basics") {
  AudioClip a, b;
  a.samples.assign(100, 0.0f);
  b.samples.assign(100, 1.0f);
  CHECK(mse_raw(a, a) == 0.0);
  CHECK(mse_raw(a, b) == doctest::Approx(1.0));
  CHECK(mse_raw(a, b) == mse_raw(b, a));
  AudioClip c;
  c.samples.assign(50, 0.0f);
  CHECK_THROWS(mse_raw(a, c));
}

namespace {

// independent brute-force SSIM, kept deliberately naive
double ssim_bruteforce(const Tensor& a, const Tensor& b, int win, double k1,
                       double k2) {
  const int64_t h = a.dim(0), w = a.dim(1);
  double mn = 1e300, mx = -1e300;
  for (int64_t i = 0; i < a.numel(); ++i) {
    mn = std::min({mn, (double)a[i], (double)b[i]});
    mx = std::max({mx, (double)a[i], (double)b[i]});
  }
  const double range = mx - mn;
  if (range == 0.0) return 1.0;
  const double c1 = k1 * range * k1 * range, c2 = k2 * range * k2 * range;
  double total = 0;
  int64_t cnt = 0;
  for (int64_t i = 0; i + win <= h; ++i)
    for (int64_t j = 0; j + win <= w; ++j) {
      std::vector<double> wa, wb;
      for (int di = 0; di < win; ++di)
        for (int dj = 0; dj < win; ++dj) {
          wa.push_back(a.at(i + di, j + dj));
          wb.push_back(b.at(i + di, j + dj));
        }
      const double n = (double)wa.size();
      double ma = 0, mb = 0;
      for (double v : wa) ma += v;
      for (double v : wb) mb += v;
      ma /= n;
      mb /= n;
      double va = 0, vb = 0, cov = 0;
      for (size_t t = 0; t < wa.size(); ++t) {
        va += (wa[t] - ma) * (wa[t] - ma);
        vb += (wb[t] - mb) * (wb[t] - mb);
        cov += (wa[t] - ma) * (wb[t] - mb);
      }
      va /= n;
      vb /= n;
      cov /= n;
      double v = ((2 * ma * mb + c1) * (2 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
      total += std::clamp(v, -1.0, 1.0);
      ++cnt;
    }
  return total / (double)cnt;
}

}  // namespace

TEST_CASE("ssim: identity, symmetry, bounds, brute-force oracle") {
  Rng rng(123);
  Tensor a({32, 32}), b({32, 32});
  for (int64_t i = 0; i < a.numel(); ++i) {
    a[i] = rng.uniform_f(-3.0f, 3.0f);
    b[i] = rng.uniform_f(-3.0f, 3.0f);
  }
  CHECK(ssim(a, a) == 1.0);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
  const double v = ssim(a, b);
  CHECK(v >= -1.0);
  CHECK(v <= 1.0);
  CHECK(std::fabs(v - ssim_bruteforce(a, b, 7, 0.01, 0.03)) <= 1e-6);

  Tensor c({16, 16});
  CHECK_THROWS(ssim(a, c));
}

TEST_CASE("pgm export writes a readable header") {
  Tensor img({4, 6});
  for (int64_t i = 0; i < img.numel(); ++i) img[i] = (float)i;
  auto path = (temp_dir() / "img.pgm").string();
  write_pgm(path, img);
  std::ifstream is(path, std::ios::binary);
  std::string magic;
  is >> magic;
  CHECK(magic == "P5");
  int w, h, maxval;
  is >> w >> h >> maxval;
  CHECK(w == 6);
  CHECK(h == 4);
  CHECK(maxval == 255);
}
