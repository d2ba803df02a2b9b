#pragma once

#include <string>
#include <utility>
#include <vector>

#include "core/autograd.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace audioinv::nn {

// Named parameter set. Models register their parameter Vars once; training,
// freezing and checkpointing all walk the registry.
class ParamSet {
 public:
  ag::Var add(const std::string& name, Tensor init) {
    ag::Var v = ag::leaf(std::move(init), true);
    entries_.emplace_back(name, v);
    return v;
  }

  const std::vector<std::pair<std::string, ag::Var>>& entries() const {
    return entries_;
  }

  std::vector<ag::Var> vars() const {
    std::vector<ag::Var> out;
    out.reserve(entries_.size());
    for (const auto& [n, v] : entries_) out.push_back(v);
    return out;
  }

  int64_t count_scalars() const {
    int64_t n = 0;
    for (const auto& [name, v] : entries_) n += v->value.numel();
    return n;
  }

  void zero_grad() {
    for (auto& [name, v] : entries_)
      if (!v->grad.empty())
        for (int64_t i = 0; i < v->grad.numel(); ++i) v->grad[i] = 0.0f;
  }

  void set_requires_grad(bool on) {
    for (auto& [name, v] : entries_) v->requires_grad = on;
  }

 private:
  std::vector<std::pair<std::string, ag::Var>> entries_;
};

// Parameter blob I/O. Format: magic, version, count, then per tensor
// (name, shape, float32 data), little-endian.
void save_params(const ParamSet& params, const std::string& path);
// Names and shapes must match the registry exactly.
void load_params(ParamSet& params, const std::string& path);

// FNV-1a over the serialized parameter values, for provenance stamps.
uint64_t params_fingerprint(const ParamSet& params);

// --- initializers ------------------------------------------------------------

Tensor he_normal(std::vector<int64_t> shape, int64_t fan_in, Rng& rng);
Tensor uniform_init(std::vector<int64_t> shape, float lo, float hi, Rng& rng);

// --- layers ------------------------------------------------------------------

class Linear {
 public:
  Linear() = default;
  Linear(ParamSet& ps, const std::string& name, int64_t in, int64_t out, Rng& rng);
  ag::Var forward(const ag::Var& x) const;  // x[B,in] -> [B,out]

 private:
  ag::Var w_;  // [out, in]
  ag::Var b_;  // [out]
};

class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ParamSet& ps, const std::string& name, int64_t in_ch, int64_t out_ch,
         int64_t k, int stride, int pad, Rng& rng);
  ag::Var forward(const ag::Var& x) const;

  int stride() const { return stride_; }
  int pad() const { return pad_; }

 private:
  ag::Var w_;  // [out,in,K]
  ag::Var b_;  // [out]
  int stride_ = 1;
  int pad_ = 0;
};

// Upsampling layer: exact adjoint of a strided Conv1d, weight [in,out,K].
class ConvTranspose1d {
 public:
  ConvTranspose1d() = default;
  ConvTranspose1d(ParamSet& ps, const std::string& name, int64_t in_ch,
                  int64_t out_ch, int64_t k, int stride, int pad, Rng& rng);
  ag::Var forward(const ag::Var& x) const;

 private:
  ag::Var w_;  // [in,out,K]
  ag::Var b_;  // [out]
  int stride_ = 1;
  int pad_ = 0;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamSet& ps, const std::string& name, int64_t in_ch, int64_t out_ch,
         int64_t k, int stride, int pad, Rng& rng);
  ag::Var forward(const ag::Var& x) const;

 private:
  ag::Var w_;  // [out,in,K,K]
  ag::Var b_;  // [out]
  int stride_ = 1;
  int pad_ = 0;
};

// --- optimizer ---------------------------------------------------------------

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

class Adam {
 public:
  Adam(std::vector<ag::Var> params, AdamConfig cfg);
  // applies .grad to values, then clears grads
  void step();
  void zero_grad();

 private:
  std::vector<ag::Var> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamConfig cfg_;
  int64_t t_ = 0;
};

}  // namespace audioinv::nn
