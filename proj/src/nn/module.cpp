#include "nn/module.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace audioinv::nn {

namespace {

constexpr char kMagic[8] = {'A', 'I', 'N', 'V', 'P', 'A', 'R', '1'};

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_params(const ParamSet& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_params: cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  write_u32(os, static_cast<uint32_t>(params.entries().size()));
  for (const auto& [name, v] : params.entries()) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(v->value.ndim()));
    for (int i = 0; i < v->value.ndim(); ++i)
      write_u32(os, static_cast<uint32_t>(v->value.dim(i)));
    os.write(reinterpret_cast<const char*>(v->value.data()),
             static_cast<std::streamsize>(v->value.numel() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("save_params: write failed for " + path);
}

void load_params(ParamSet& params, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_params: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_params: bad magic in " + path);
  const uint32_t count = read_u32(is);
  if (count != params.entries().size())
    throw std::runtime_error("load_params: parameter count mismatch in " + path);
  for (const auto& [name, v] : params.entries()) {
    const uint32_t nlen = read_u32(is);
    std::string fname(nlen, '\0');
    is.read(fname.data(), nlen);
    if (fname != name)
      throw std::runtime_error("load_params: expected parameter '" + name +
                               "', found '" + fname + "'");
    const uint32_t nd = read_u32(is);
    if (nd != static_cast<uint32_t>(v->value.ndim()))
      throw std::runtime_error("load_params: rank mismatch for " + name);
    for (int i = 0; i < v->value.ndim(); ++i)
      if (read_u32(is) != static_cast<uint32_t>(v->value.dim(i)))
        throw std::runtime_error("load_params: shape mismatch for " + name);
    is.read(reinterpret_cast<char*>(v->value.data()),
            static_cast<std::streamsize>(v->value.numel() * sizeof(float)));
    if (!is) throw std::runtime_error("load_params: truncated data in " + path);
  }
}

uint64_t params_fingerprint(const ParamSet& params) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, v] : params.entries()) {
    mix(name.data(), name.size());
    mix(v->value.data(), static_cast<size_t>(v->value.numel()) * sizeof(float));
  }
  return h;
}

Tensor he_normal(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal_f(0.0f, stddev);
  return t;
}

Tensor uniform_init(std::vector<int64_t> shape, float lo, float hi, Rng& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform_f(lo, hi);
  return t;
}

Linear::Linear(ParamSet& ps, const std::string& name, int64_t in, int64_t out,
               Rng& rng) {
  w_ = ps.add(name + ".w", he_normal({out, in}, in, rng));
  b_ = ps.add(name + ".b", Tensor({out}));
}

ag::Var Linear::forward(const ag::Var& x) const {
  return ag::bias_add(ag::matmul(x, w_, false, true), b_);
}

Conv1d::Conv1d(ParamSet& ps, const std::string& name, int64_t in_ch, int64_t out_ch,
               int64_t k, int stride, int pad, Rng& rng)
    : stride_(stride), pad_(pad) {
  w_ = ps.add(name + ".w", he_normal({out_ch, in_ch, k}, in_ch * k, rng));
  b_ = ps.add(name + ".b", Tensor({out_ch}));
}

ag::Var Conv1d::forward(const ag::Var& x) const {
  return ag::bias_add(ag::conv1d(x, w_, stride_, pad_), b_);
}

ConvTranspose1d::ConvTranspose1d(ParamSet& ps, const std::string& name,
                                 int64_t in_ch, int64_t out_ch, int64_t k,
                                 int stride, int pad, Rng& rng)
    : stride_(stride), pad_(pad) {
  // fan-in per output sample is in_ch * k / stride contributions
  w_ = ps.add(name + ".w",
              he_normal({in_ch, out_ch, k}, std::max<int64_t>(1, in_ch * k / stride), rng));
  b_ = ps.add(name + ".b", Tensor({out_ch}));
}

ag::Var ConvTranspose1d::forward(const ag::Var& x) const {
  return ag::bias_add(ag::conv1d_transpose(x, w_, stride_, pad_), b_);
}

Conv2d::Conv2d(ParamSet& ps, const std::string& name, int64_t in_ch, int64_t out_ch,
               int64_t k, int stride, int pad, Rng& rng)
    : stride_(stride), pad_(pad) {
  w_ = ps.add(name + ".w", he_normal({out_ch, in_ch, k, k}, in_ch * k * k, rng));
  b_ = ps.add(name + ".b", Tensor({out_ch}));
}

ag::Var Conv2d::forward(const ag::Var& x) const {
  return ag::bias_add(ag::conv2d(x, w_, stride_, pad_), b_);
}

Adam::Adam(std::vector<ag::Var> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  ++t_;
  const float bc1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    ag::Var& p = params_[i];
    if (p->grad.empty()) continue;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (int64_t j = 0; j < p->value.numel(); ++j) {
      const float g = p->grad[j];
      m[j] = cfg_.beta1 * m[j] + (1.0f - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0f - cfg_.beta2) * g * g;
      const float mhat = m[j] / bc1;
      const float vhat = v[j] / bc2;
      p->value[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (auto& p : params_)
    if (!p->grad.empty())
      for (int64_t j = 0; j < p->grad.numel(); ++j) p->grad[j] = 0.0f;
}

}  // namespace audioinv::nn
