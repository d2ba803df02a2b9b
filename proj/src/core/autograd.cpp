#include "core/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "kernels/kernels.hpp"

namespace audioinv::ag {

namespace {

thread_local bool g_grad_enabled = true;

using BackFn =
    std::function<std::vector<Var>(const Var& gy, const std::vector<bool>& needs)>;

bool any_requires(const std::vector<Var>& parents) {
  for (const auto& p : parents)
    if (p && p->requires_grad) return true;
  return false;
}

Var make(Tensor value, std::vector<Var> parents, BackFn fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (g_grad_enabled && any_requires(parents)) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(fn);
  }
  return n;
}

const kernels::KernelTable& K() { return kernels::active(); }

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a->value.shape_str() + " vs " + b->value.shape_str());
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev; }

Var leaf(Tensor v, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = requires_grad;
  return n;
}

Var constant(Tensor v) { return leaf(std::move(v), false); }

Var detach(const Var& a) { return constant(a->value); }

// --- elementwise -------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out(a->value.shape());
  K().vadd(out.data(), a->value.data(), b->value.data(),
           static_cast<size_t>(out.numel()));
  return make(std::move(out), {a, b},
              [](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                return {needs[0] ? gy : nullptr, needs[1] ? gy : nullptr};
              });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a->value.shape());
  K().vsub(out.data(), a->value.data(), b->value.data(),
           static_cast<size_t>(out.numel()));
  return make(std::move(out), {a, b},
              [](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                return {needs[0] ? gy : nullptr, needs[1] ? neg(gy) : nullptr};
              });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a->value.shape());
  K().vmul(out.data(), a->value.data(), b->value.data(),
           static_cast<size_t>(out.numel()));
  return make(std::move(out), {a, b},
              [a, b](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                return {needs[0] ? mul(gy, b) : nullptr,
                        needs[1] ? mul(gy, a) : nullptr};
              });
}

Var add_scalar(const Var& a, float s) {
  Tensor out(a->value.shape());
  K().vadd_scalar(out.data(), a->value.data(), s, static_cast<size_t>(out.numel()));
  return make(std::move(out), {a},
              [](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                return {needs[0] ? gy : nullptr};
              });
}

Var mul_scalar(const Var& a, float s) {
  Tensor out(a->value.shape());
  K().vscale(out.data(), a->value.data(), s, static_cast<size_t>(out.numel()));
  return make(std::move(out), {a},
              [s](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                return {needs[0] ? mul_scalar(gy, s) : nullptr};
              });
}

Var neg(const Var& a) { return mul_scalar(a, -1.0f); }

namespace {

// elementwise op whose gradient is gy * factor with `factor` captured as a
// constant (exact for first-order use; a.e. exact for masks)
Var unary_frozen(const Var& a, Tensor out, Tensor factor) {
  auto fshared = std::make_shared<Tensor>(std::move(factor));
  return make(std::move(out), {a},
              [fshared](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                if (!needs[0]) return {nullptr};
                return {mul(gy, constant(*fshared))};
              });
}

}  // namespace

Var relu(const Var& a) {
  const int64_t n = a->value.numel();
  Tensor out(a->value.shape());
  K().leaky_relu(out.data(), a->value.data(), 0.0f, static_cast<size_t>(n));
  Tensor factor(a->value.shape());
  for (int64_t i = 0; i < n; ++i) factor[i] = a->value[i] > 0.0f ? 1.0f : 0.0f;
  return unary_frozen(a, std::move(out), std::move(factor));
}

Var leaky_relu(const Var& a, float slope) {
  const int64_t n = a->value.numel();
  Tensor out(a->value.shape());
  K().leaky_relu(out.data(), a->value.data(), slope, static_cast<size_t>(n));
  Tensor factor(a->value.shape());
  for (int64_t i = 0; i < n; ++i) factor[i] = a->value[i] > 0.0f ? 1.0f : slope;
  return unary_frozen(a, std::move(out), std::move(factor));
}

Var tanh_(const Var& a) {
  const int64_t n = a->value.numel();
  Tensor out(a->value.shape());
  Tensor factor(a->value.shape());
  for (int64_t i = 0; i < n; ++i) {
    const float y = std::tanh(a->value[i]);
    out[i] = y;
    factor[i] = 1.0f - y * y;
  }
  return unary_frozen(a, std::move(out), std::move(factor));
}

Var abs_(const Var& a) {
  const int64_t n = a->value.numel();
  Tensor out(a->value.shape());
  Tensor factor(a->value.shape());
  for (int64_t i = 0; i < n; ++i) {
    const float v = a->value[i];
    out[i] = std::fabs(v);
    factor[i] = v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f);
  }
  return unary_frozen(a, std::move(out), std::move(factor));
}

Var square(const Var& a) { return mul(a, a); }

Var sqrt_(const Var& a) {
  const int64_t n = a->value.numel();
  Tensor out(a->value.shape());
  Tensor factor(a->value.shape());
  for (int64_t i = 0; i < n; ++i) {
    const float y = std::sqrt(a->value[i]);
    out[i] = y;
    factor[i] = y > 0.0f ? 0.5f / y : 0.0f;
  }
  return unary_frozen(a, std::move(out), std::move(factor));
}

Var log_floor(const Var& a, float floor_v) {
  if (!(floor_v > 0.0f)) throw std::invalid_argument("log_floor: floor must be > 0");
  const int64_t n = a->value.numel();
  Tensor out(a->value.shape());
  Tensor factor(a->value.shape());
  for (int64_t i = 0; i < n; ++i) {
    const float v = a->value[i];
    if (v > floor_v) {
      out[i] = std::log(v);
      factor[i] = 1.0f / v;
    } else {
      out[i] = std::log(floor_v);
      factor[i] = 0.0f;
    }
  }
  return unary_frozen(a, std::move(out), std::move(factor));
}

Var magnitude(const Var& re, const Var& im, float tiny) {
  check_same_shape(re, im, "magnitude");
  const int64_t n = re->value.numel();
  Tensor out(re->value.shape());
  K().magnitude(out.data(), re->value.data(), im->value.data(), tiny,
                static_cast<size_t>(n));
  Tensor fre(re->value.shape());
  Tensor fim(re->value.shape());
  for (int64_t i = 0; i < n; ++i) {
    const float inv = 1.0f / out[i];  // out >= sqrt(tiny) > 0
    fre[i] = re->value[i] * inv;
    fim[i] = im->value[i] * inv;
  }
  auto fre_s = std::make_shared<Tensor>(std::move(fre));
  auto fim_s = std::make_shared<Tensor>(std::move(fim));
  return make(std::move(out), {re, im},
              [fre_s, fim_s](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                return {needs[0] ? mul(gy, constant(*fre_s)) : nullptr,
                        needs[1] ? mul(gy, constant(*fim_s)) : nullptr};
              });
}

// --- shape / broadcast -------------------------------------------------------

Var reshape(const Var& a, std::vector<int64_t> shape) {
  Tensor out = a->value.reshaped(shape);
  auto orig = a->value.shape();
  return make(std::move(out), {a},
              [orig](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                return {needs[0] ? reshape(gy, orig) : nullptr};
              });
}

Var broadcast_scalar(const Var& a, std::vector<int64_t> shape) {
  if (a->value.numel() != 1)
    throw std::invalid_argument("broadcast_scalar: source must be scalar");
  Tensor out = Tensor::full(shape, a->value[0]);
  return make(std::move(out), {a},
              [](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                return {needs[0] ? sum_all(gy) : nullptr};
              });
}

Var bias_add(const Var& x, const Var& b) {
  const auto& xs = x->value.shape();
  if (xs.size() < 2 || b->value.ndim() != 1 || b->value.dim(0) != xs[1])
    throw std::invalid_argument("bias_add: bias must be 1-D matching axis 1");
  const int64_t batch = xs[0];
  const int64_t ch = xs[1];
  int64_t inner = 1;
  for (size_t i = 2; i < xs.size(); ++i) inner *= xs[i];
  Tensor out(xs);
  const float* xd = x->value.data();
  float* od = out.data();
  for (int64_t n = 0; n < batch; ++n)
    for (int64_t c = 0; c < ch; ++c) {
      const float bv = b->value[c];
      const int64_t base = (n * ch + c) * inner;
      K().vadd_scalar(od + base, xd + base, bv, static_cast<size_t>(inner));
    }
  return make(std::move(out), {x, b},
              [](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                return {needs[0] ? gy : nullptr,
                        needs[1] ? sum_to_channel(gy) : nullptr};
              });
}

Var sum_to_channel(const Var& x) {
  const auto& xs = x->value.shape();
  if (xs.size() < 2) throw std::invalid_argument("sum_to_channel: need >= 2 axes");
  const int64_t batch = xs[0];
  const int64_t ch = xs[1];
  int64_t inner = 1;
  for (size_t i = 2; i < xs.size(); ++i) inner *= xs[i];
  Tensor out({ch});
  const float* xd = x->value.data();
  for (int64_t n = 0; n < batch; ++n)
    for (int64_t c = 0; c < ch; ++c)
      out[c] += K().sum(xd + (n * ch + c) * inner, static_cast<size_t>(inner));
  auto xshape = xs;
  return make(std::move(out), {x},
              [xshape](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                if (!needs[0]) return {nullptr};
                // adjoint: broadcast bias gradient back over batch and inner axes
                Tensor zero(xshape);
                Var zv = constant(std::move(zero));
                return {bias_add(zv, gy)};
              });
}

// --- reductions --------------------------------------------------------------

Var sum_all(const Var& a) {
  Tensor out = Tensor::scalar(K().sum(a->value.data(), static_cast<size_t>(a->value.numel())));
  auto shape = a->value.shape();
  return make(std::move(out), {a},
              [shape](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                return {needs[0] ? broadcast_scalar(gy, shape) : nullptr};
              });
}

Var mean_all(const Var& a) {
  const float inv = 1.0f / static_cast<float>(a->value.numel());
  return mul_scalar(sum_all(a), inv);
}

Var sum_sq(const Var& a) {
  Tensor out =
      Tensor::scalar(K().sum_sq(a->value.data(), static_cast<size_t>(a->value.numel())));
  auto shape = a->value.shape();
  return make(std::move(out), {a},
              [a, shape](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                if (!needs[0]) return {nullptr};
                return {mul_scalar(mul(broadcast_scalar(gy, shape), a), 2.0f)};
              });
}

// --- matmul ------------------------------------------------------------------

Var matmul(const Var& a, const Var& b, bool ta, bool tb) {
  if (ta && tb) throw std::invalid_argument("matmul: ta && tb unsupported");
  if (a->value.ndim() != 2 || b->value.ndim() != 2)
    throw std::invalid_argument("matmul: expects 2-D tensors");
  const int64_t am = a->value.dim(0), an = a->value.dim(1);
  const int64_t bm = b->value.dim(0), bn = b->value.dim(1);
  const int64_t m = ta ? an : am;
  const int64_t kk = ta ? am : an;
  const int64_t kb = tb ? bn : bm;
  const int64_t n = tb ? bm : bn;
  if (kk != kb)
    throw std::invalid_argument("matmul: inner dimension mismatch " +
                                a->value.shape_str() + " vs " + b->value.shape_str());
  Tensor out({m, n});
  const float* ad = a->value.data();
  const float* bd = b->value.data();
  if (!ta && !tb)
    K().gemm_nn(m, n, kk, ad, bd, out.data());
  else if (ta && !tb)
    K().gemm_tn(m, n, kk, ad, bd, out.data());
  else
    K().gemm_nt(m, n, kk, ad, bd, out.data());
  return make(std::move(out), {a, b},
              [a, b, ta, tb](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                Var ga = nullptr, gb = nullptr;
                if (!ta && !tb) {
                  if (needs[0]) ga = matmul(gy, b, false, true);
                  if (needs[1]) gb = matmul(a, gy, true, false);
                } else if (ta && !tb) {
                  if (needs[0]) ga = matmul(b, gy, false, true);
                  if (needs[1]) gb = matmul(a, gy, false, false);
                } else {  // !ta && tb
                  if (needs[0]) ga = matmul(gy, b, false, false);
                  if (needs[1]) gb = matmul(gy, a, true, false);
                }
                return {ga, gb};
              });
}

// --- convolution helpers -----------------------------------------------------

namespace {

int64_t conv_out_len(int64_t in, int64_t k, int64_t s, int64_t p) {
  const int64_t t = in + 2 * p - k;
  if (t < 0) throw std::invalid_argument("conv: kernel larger than padded input");
  return t / s + 1;
}

// x[Ci,L] -> col[Ci*K, Lo]
void im2col_1d(const float* x, int64_t ci, int64_t l, int64_t k, int64_t s,
               int64_t p, int64_t lo, float* col) {
  for (int64_t c = 0; c < ci; ++c) {
    const float* xc = x + c * l;
    for (int64_t kk = 0; kk < k; ++kk) {
      float* row = col + (c * k + kk) * lo;
      for (int64_t o = 0; o < lo; ++o) {
        const int64_t idx = o * s - p + kk;
        row[o] = (idx >= 0 && idx < l) ? xc[idx] : 0.0f;
      }
    }
  }
}

// col[Ci*K, Lo] += scatter into y[Ci, L] (adjoint of im2col_1d)
void col2im_1d_add(const float* col, int64_t ci, int64_t l, int64_t k, int64_t s,
                   int64_t p, int64_t lo, float* y) {
  for (int64_t c = 0; c < ci; ++c) {
    float* yc = y + c * l;
    for (int64_t kk = 0; kk < k; ++kk) {
      const float* row = col + (c * k + kk) * lo;
      for (int64_t o = 0; o < lo; ++o) {
        const int64_t idx = o * s - p + kk;
        if (idx >= 0 && idx < l) yc[idx] += row[o];
      }
    }
  }
}

// x[Ci,H,W] -> col[Ci*K*K, Ho*Wo]
void im2col_2d(const float* x, int64_t ci, int64_t h, int64_t w, int64_t k,
               int64_t s, int64_t p, int64_t ho, int64_t wo, float* col) {
  for (int64_t c = 0; c < ci; ++c) {
    const float* xc = x + c * h * w;
    for (int64_t ky = 0; ky < k; ++ky)
      for (int64_t kx = 0; kx < k; ++kx) {
        float* row = col + ((c * k + ky) * k + kx) * (ho * wo);
        for (int64_t oy = 0; oy < ho; ++oy) {
          const int64_t iy = oy * s - p + ky;
          float* rrow = row + oy * wo;
          if (iy < 0 || iy >= h) {
            std::memset(rrow, 0, static_cast<size_t>(wo) * sizeof(float));
            continue;
          }
          const float* xrow = xc + iy * w;
          for (int64_t ox = 0; ox < wo; ++ox) {
            const int64_t ix = ox * s - p + kx;
            rrow[ox] = (ix >= 0 && ix < w) ? xrow[ix] : 0.0f;
          }
        }
      }
  }
}

void col2im_2d_add(const float* col, int64_t ci, int64_t h, int64_t w, int64_t k,
                   int64_t s, int64_t p, int64_t ho, int64_t wo, float* y) {
  for (int64_t c = 0; c < ci; ++c) {
    float* yc = y + c * h * w;
    for (int64_t ky = 0; ky < k; ++ky)
      for (int64_t kx = 0; kx < k; ++kx) {
        const float* row = col + ((c * k + ky) * k + kx) * (ho * wo);
        for (int64_t oy = 0; oy < ho; ++oy) {
          const int64_t iy = oy * s - p + ky;
          if (iy < 0 || iy >= h) continue;
          float* yrow = yc + iy * w;
          const float* rrow = row + oy * wo;
          for (int64_t ox = 0; ox < wo; ++ox) {
            const int64_t ix = ox * s - p + kx;
            if (ix >= 0 && ix < w) yrow[ix] += rrow[ox];
          }
        }
      }
  }
}

// gw[Co,Ci,K] for conv1d: gw += sum_b gy_b x colT
Tensor conv1d_wgrad_value(const Tensor& x, const Tensor& gy, int64_t k, int stride,
                          int pad) {
  const int64_t batch = x.dim(0), ci = x.dim(1), l = x.dim(2);
  const int64_t co = gy.dim(1), lo = gy.dim(2);
  Tensor gw({co, ci, k});
  std::vector<float> col(static_cast<size_t>(ci * k * lo));
  for (int64_t b = 0; b < batch; ++b) {
    im2col_1d(x.data() + b * ci * l, ci, l, k, stride, pad, lo, col.data());
    K().gemm_nt(co, ci * k, lo, gy.data() + b * co * lo, col.data(), gw.data());
  }
  return gw;
}

Tensor conv2d_wgrad_value(const Tensor& x, const Tensor& gy, int64_t k, int stride,
                          int pad) {
  const int64_t batch = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t co = gy.dim(1), ho = gy.dim(2), wo = gy.dim(3);
  Tensor gw({co, ci, k, k});
  std::vector<float> col(static_cast<size_t>(ci * k * k * ho * wo));
  for (int64_t b = 0; b < batch; ++b) {
    im2col_2d(x.data() + b * ci * h * w, ci, h, w, k, stride, pad, ho, wo, col.data());
    K().gemm_nt(co, ci * k * k, ho * wo, gy.data() + b * co * ho * wo, col.data(),
                gw.data());
  }
  return gw;
}

// wgrad as an op; never differentiated further (only appears inside the
// final backward pass)
Var conv1d_wgrad_op(const Var& x, const Var& gy, int64_t k, int stride, int pad) {
  return constant(conv1d_wgrad_value(x->value, gy->value, k, stride, pad));
}

Var conv2d_wgrad_op(const Var& x, const Var& gy, int64_t k, int stride, int pad) {
  return constant(conv2d_wgrad_value(x->value, gy->value, k, stride, pad));
}

Var conv1d_transpose_to(const Var& x, const Var& w, int stride, int pad,
                        int64_t out_len);
Var conv2d_transpose_to(const Var& x, const Var& w, int stride, int pad,
                        int64_t out_h, int64_t out_w);

}  // namespace

Var conv1d(const Var& x, const Var& w, int stride, int pad) {
  if (x->value.ndim() != 3 || w->value.ndim() != 3)
    throw std::invalid_argument("conv1d: x must be [B,Ci,L], w [Co,Ci,K]");
  if (x->value.dim(1) != w->value.dim(1))
    throw std::invalid_argument("conv1d: channel mismatch " + x->value.shape_str() +
                                " vs " + w->value.shape_str());
  const int64_t batch = x->value.dim(0), ci = x->value.dim(1), l = x->value.dim(2);
  const int64_t co = w->value.dim(0), k = w->value.dim(2);
  const int64_t lo = conv_out_len(l, k, stride, pad);
  Tensor out({batch, co, lo});
  std::vector<float> col(static_cast<size_t>(ci * k * lo));
  for (int64_t b = 0; b < batch; ++b) {
    im2col_1d(x->value.data() + b * ci * l, ci, l, k, stride, pad, lo, col.data());
    K().gemm_nn(co, lo, ci * k, w->value.data(), col.data(),
                out.data() + b * co * lo);
  }
  return make(std::move(out), {x, w},
              [x, w, stride, pad, l, k](const Var& gy, const std::vector<bool>& needs)
                  -> std::vector<Var> {
                Var gx = nullptr, gw = nullptr;
                if (needs[0]) gx = conv1d_transpose_to(gy, w, stride, pad, l);
                if (needs[1]) gw = conv1d_wgrad_op(x, gy, k, stride, pad);
                return {gx, gw};
              });
}

namespace {

Var conv1d_transpose_to(const Var& x, const Var& w, int stride, int pad,
                        int64_t out_len) {
  if (x->value.ndim() != 3 || w->value.ndim() != 3)
    throw std::invalid_argument("conv1d_transpose: x must be [B,Co,Lo], w [Co,Ci,K]");
  if (x->value.dim(1) != w->value.dim(0))
    throw std::invalid_argument("conv1d_transpose: channel mismatch " +
                                x->value.shape_str() + " vs " + w->value.shape_str());
  const int64_t batch = x->value.dim(0), co = x->value.dim(1), lo = x->value.dim(2);
  const int64_t ci = w->value.dim(1), k = w->value.dim(2);
  const int64_t li = out_len >= 0 ? out_len : stride * (lo - 1) + k - 2 * pad;
  if (li <= 0) throw std::invalid_argument("conv1d_transpose: nonpositive output length");
  Tensor out({batch, ci, li});
  std::vector<float> col(static_cast<size_t>(ci * k * lo));
  for (int64_t b = 0; b < batch; ++b) {
    std::fill(col.begin(), col.end(), 0.0f);
    K().gemm_tn(ci * k, lo, co, w->value.data(), x->value.data() + b * co * lo,
                col.data());
    col2im_1d_add(col.data(), ci, li, k, stride, pad, lo, out.data() + b * ci * li);
  }
  return make(std::move(out), {x, w},
              [x, w, stride, pad, k](const Var& gy, const std::vector<bool>& needs)
                  -> std::vector<Var> {
                Var gx = nullptr, gw = nullptr;
                if (needs[0]) gx = conv1d(gy, w, stride, pad);
                if (needs[1]) gw = conv1d_wgrad_op(gy, x, k, stride, pad);
                return {gx, gw};
              });
}

}  // namespace

Var conv1d_transpose(const Var& x, const Var& w, int stride, int pad) {
  return conv1d_transpose_to(x, w, stride, pad, -1);
}

Var conv2d(const Var& x, const Var& w, int stride, int pad) {
  if (x->value.ndim() != 4 || w->value.ndim() != 4)
    throw std::invalid_argument("conv2d: x must be [B,Ci,H,W], w [Co,Ci,K,K]");
  if (x->value.dim(1) != w->value.dim(1))
    throw std::invalid_argument("conv2d: channel mismatch " + x->value.shape_str() +
                                " vs " + w->value.shape_str());
  if (w->value.dim(2) != w->value.dim(3))
    throw std::invalid_argument("conv2d: only square kernels supported");
  const int64_t batch = x->value.dim(0), ci = x->value.dim(1);
  const int64_t h = x->value.dim(2), wd = x->value.dim(3);
  const int64_t co = w->value.dim(0), k = w->value.dim(2);
  const int64_t ho = conv_out_len(h, k, stride, pad);
  const int64_t wo = conv_out_len(wd, k, stride, pad);
  Tensor out({batch, co, ho, wo});
  std::vector<float> col(static_cast<size_t>(ci * k * k * ho * wo));
  for (int64_t b = 0; b < batch; ++b) {
    im2col_2d(x->value.data() + b * ci * h * wd, ci, h, wd, k, stride, pad, ho, wo,
              col.data());
    K().gemm_nn(co, ho * wo, ci * k * k, w->value.data(), col.data(),
                out.data() + b * co * ho * wo);
  }
  return make(std::move(out), {x, w},
              [x, w, stride, pad, h, wd, k](const Var& gy, const std::vector<bool>& needs)
                  -> std::vector<Var> {
                Var gx = nullptr, gw = nullptr;
                if (needs[0]) gx = conv2d_transpose_to(gy, w, stride, pad, h, wd);
                if (needs[1]) gw = conv2d_wgrad_op(x, gy, k, stride, pad);
                return {gx, gw};
              });
}

namespace {

Var conv2d_transpose_to(const Var& x, const Var& w, int stride, int pad,
                        int64_t out_h, int64_t out_w) {
  const int64_t batch = x->value.dim(0), co = x->value.dim(1);
  const int64_t ho = x->value.dim(2), wo = x->value.dim(3);
  const int64_t ci = w->value.dim(1), k = w->value.dim(2);
  const int64_t hh = out_h >= 0 ? out_h : stride * (ho - 1) + k - 2 * pad;
  const int64_t ww = out_w >= 0 ? out_w : stride * (wo - 1) + k - 2 * pad;
  Tensor out({batch, ci, hh, ww});
  std::vector<float> col(static_cast<size_t>(ci * k * k * ho * wo));
  for (int64_t b = 0; b < batch; ++b) {
    std::fill(col.begin(), col.end(), 0.0f);
    K().gemm_tn(ci * k * k, ho * wo, co, w->value.data(),
                x->value.data() + b * co * ho * wo, col.data());
    col2im_2d_add(col.data(), ci, hh, ww, k, stride, pad, ho, wo,
                  out.data() + b * ci * hh * ww);
  }
  return make(std::move(out), {x, w},
              [x, w, stride, pad, k](const Var& gy, const std::vector<bool>& needs)
                  -> std::vector<Var> {
                Var gx = nullptr, gw = nullptr;
                if (needs[0]) gx = conv2d(gy, w, stride, pad);
                if (needs[1]) gw = conv2d_wgrad_op(gy, x, k, stride, pad);
                return {gx, gw};
              });
}

}  // namespace

Var conv2d_transpose(const Var& x, const Var& w, int stride, int pad) {
  return conv2d_transpose_to(x, w, stride, pad, -1, -1);
}

// --- pooling -----------------------------------------------------------------

Var global_avg_pool2d(const Var& x) {
  if (x->value.ndim() != 4)
    throw std::invalid_argument("global_avg_pool2d: expects [B,C,H,W]");
  const int64_t batch = x->value.dim(0), c = x->value.dim(1);
  const int64_t hw = x->value.dim(2) * x->value.dim(3);
  const float inv = 1.0f / static_cast<float>(hw);
  Tensor out({batch, c});
  for (int64_t i = 0; i < batch * c; ++i)
    out[i] = K().sum(x->value.data() + i * hw, static_cast<size_t>(hw)) * inv;
  auto xshape = x->value.shape();
  return make(std::move(out), {x},
              [xshape, inv, hw](const Var& gy, const std::vector<bool>& needs)
                  -> std::vector<Var> {
                if (!needs[0]) return {nullptr};
                // spread gy/hw uniformly over each spatial plane
                Tensor g(xshape);
                const Tensor& gv = gy->value;
                for (int64_t i = 0; i < gv.numel(); ++i) {
                  float* plane = g.data() + i * hw;
                  const float v = gv[i] * inv;
                  for (int64_t j = 0; j < hw; ++j) plane[j] = v;
                }
                return {constant(std::move(g))};
              });
}

// --- signal ------------------------------------------------------------------

Var frame_signal(const Var& x, int window, int hop) {
  if (x->value.ndim() != 2)
    throw std::invalid_argument("frame_signal: expects [B,L]");
  if (window <= 0 || hop <= 0 || hop > window)
    throw std::invalid_argument("frame_signal: need 0 < hop <= window");
  const int64_t batch = x->value.dim(0), l = x->value.dim(1);
  if (window > l) throw std::invalid_argument("frame_signal: window longer than signal");
  const int64_t frames = 1 + (l - window) / hop;
  Tensor out({batch, frames, window});
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t f = 0; f < frames; ++f)
      std::memcpy(out.data() + (b * frames + f) * window,
                  x->value.data() + b * l + f * hop,
                  static_cast<size_t>(window) * sizeof(float));
  auto xshape = x->value.shape();
  return make(std::move(out), {x},
              [xshape, window, hop](const Var& gy, const std::vector<bool>& needs)
                  -> std::vector<Var> {
                if (!needs[0]) return {nullptr};
                const int64_t batch = xshape[0], l = xshape[1];
                const int64_t frames = gy->value.dim(1);
                Tensor g(xshape);
                for (int64_t b = 0; b < batch; ++b)
                  for (int64_t f = 0; f < frames; ++f)
                    K().axpy(g.data() + b * l + f * hop, 1.0f,
                             gy->value.data() + (b * frames + f) * window,
                             static_cast<size_t>(window));
                return {constant(std::move(g))};
              });
}

namespace {

inline int64_t reflect_index(int64_t i, int64_t t) {
  if (i < 0) return -i - 1;
  if (i >= t) return 2 * t - 1 - i;
  return i;
}

Var time_shift_reflect_adj(const Var& x, const std::vector<int>& shifts);

Tensor shift_forward_value(const Tensor& x, const std::vector<int>& shifts) {
  const int64_t bc = x.dim(0) * x.dim(1), t = x.dim(2);
  Tensor out(x.shape());
  for (int64_t m = 0; m < bc; ++m) {
    const float* src = x.data() + m * t;
    float* dst = out.data() + m * t;
    const int64_t sh = shifts[static_cast<size_t>(m)];
    for (int64_t i = 0; i < t; ++i) dst[i] = src[reflect_index(i - sh, t)];
  }
  return out;
}

Tensor shift_adjoint_value(const Tensor& gy, const std::vector<int>& shifts) {
  const int64_t bc = gy.dim(0) * gy.dim(1), t = gy.dim(2);
  Tensor out(gy.shape());
  for (int64_t m = 0; m < bc; ++m) {
    const float* src = gy.data() + m * t;
    float* dst = out.data() + m * t;
    const int64_t sh = shifts[static_cast<size_t>(m)];
    for (int64_t i = 0; i < t; ++i) dst[reflect_index(i - sh, t)] += src[i];
  }
  return out;
}

void check_shifts(const Var& x, const std::vector<int>& shifts, const char* op) {
  if (x->value.ndim() != 3)
    throw std::invalid_argument(std::string(op) + ": expects [B,C,T]");
  const int64_t t = x->value.dim(2);
  if (static_cast<int64_t>(shifts.size()) != x->value.dim(0) * x->value.dim(1))
    throw std::invalid_argument(std::string(op) + ": one shift per (batch,channel)");
  for (int s : shifts)
    if (std::abs(s) >= t)
      throw std::invalid_argument(std::string(op) + ": |shift| must be < time dim");
}

Var time_shift_reflect_adj(const Var& x, const std::vector<int>& shifts) {
  check_shifts(x, shifts, "time_shift_reflect_adj");
  Tensor out = shift_adjoint_value(x->value, shifts);
  return make(std::move(out), {x},
              [shifts](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                return {needs[0] ? time_shift_reflect(gy, shifts) : nullptr};
              });
}

}  // namespace

Var time_shift_reflect(const Var& x, const std::vector<int>& shifts) {
  check_shifts(x, shifts, "time_shift_reflect");
  Tensor out = shift_forward_value(x->value, shifts);
  return make(std::move(out), {x},
              [shifts](const Var& gy, const std::vector<bool>& needs) -> std::vector<Var> {
                return {needs[0] ? time_shift_reflect_adj(gy, shifts) : nullptr};
              });
}

// --- losses ------------------------------------------------------------------

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels) {
  if (logits->value.ndim() != 2)
    throw std::invalid_argument("softmax_cross_entropy: logits must be [B,C]");
  const int64_t batch = logits->value.dim(0), c = logits->value.dim(1);
  if (static_cast<int64_t>(labels.size()) != batch)
    throw std::invalid_argument("softmax_cross_entropy: labels size mismatch");
  double loss = 0.0;
  Tensor gfrozen({batch, c});
  const float invb = 1.0f / static_cast<float>(batch);
  for (int64_t b = 0; b < batch; ++b) {
    const int lbl = labels[static_cast<size_t>(b)];
    if (lbl < 0 || lbl >= c)
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
    const float* row = logits->value.data() + b * c;
    float mx = row[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double se = 0.0;
    for (int64_t j = 0; j < c; ++j) se += std::exp(static_cast<double>(row[j] - mx));
    const double lse = static_cast<double>(mx) + std::log(se);
    loss += lse - static_cast<double>(row[lbl]);
    for (int64_t j = 0; j < c; ++j) {
      const float p =
          static_cast<float>(std::exp(static_cast<double>(row[j]) - lse));
      gfrozen.at(b, j) = (p - (j == lbl ? 1.0f : 0.0f)) * invb;
    }
  }
  Tensor out = Tensor::scalar(static_cast<float>(loss / static_cast<double>(batch)));
  auto gshared = std::make_shared<Tensor>(std::move(gfrozen));
  auto shape = logits->value.shape();
  return make(std::move(out), {logits},
              [gshared, shape](const Var& gy, const std::vector<bool>& needs)
                  -> std::vector<Var> {
                if (!needs[0]) return {nullptr};
                return {mul(broadcast_scalar(gy, shape), constant(*gshared))};
              });
}

// --- engine ------------------------------------------------------------------

namespace {

void topo_order(Node* root, std::vector<Node*>& order) {
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx].get();
      ++idx;
      if (p != nullptr && visited.insert(p).second && !p->parents.empty())
        stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

struct EngineResult {
  std::unordered_map<Node*, Var> grads;
};

EngineResult run_engine(const Var& root, const std::vector<Var>& wrt,
                        bool wrt_mode, bool create_graph) {
  if (root->value.numel() != 1)
    throw std::invalid_argument("backward: root must be scalar");

  std::vector<Node*> order;
  topo_order(root.get(), order);
  // `order` is post-order: parents before children. Leaves with no parents
  // may be missing; they never carry backward_fns so that is fine.

  std::unordered_set<Node*> wanted;
  if (wrt_mode) {
    for (const auto& v : wrt) wanted.insert(v.get());
    for (Node* n : order) {
      if (wanted.count(n)) continue;
      for (const auto& p : n->parents)
        if (p && wanted.count(p.get())) {
          wanted.insert(n);
          break;
        }
    }
  }

  auto is_wanted = [&](Node* n) {
    return wrt_mode ? wanted.count(n) > 0 : n->requires_grad;
  };

  EngineResult res;
  res.grads[root.get()] = constant(Tensor::full(root->value.shape(), 1.0f));

  // Run with graph recording only when the caller wants a differentiable
  // result; plain backward computes raw tensors.
  std::unique_ptr<NoGradGuard> guard;
  bool restore = false;
  bool prev = g_grad_enabled;
  if (!create_graph) {
    guard = std::make_unique<NoGradGuard>();
  } else {
    g_grad_enabled = true;
    restore = true;
  }

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    auto git = res.grads.find(n);
    if (git == res.grads.end() || !n->backward_fn) continue;
    if (!is_wanted(n) && n != root.get()) continue;
    std::vector<bool> needs(n->parents.size(), false);
    bool any = false;
    for (size_t i = 0; i < n->parents.size(); ++i) {
      Node* p = n->parents[i].get();
      if (p != nullptr && is_wanted(p)) {
        needs[i] = true;
        any = true;
      }
    }
    if (!any) continue;
    std::vector<Var> gs = n->backward_fn(git->second, needs);
    for (size_t i = 0; i < n->parents.size(); ++i) {
      if (!needs[i] || !gs[i]) continue;
      Node* p = n->parents[i].get();
      auto pit = res.grads.find(p);
      if (pit == res.grads.end())
        res.grads[p] = gs[i];
      else
        pit->second = add(pit->second, gs[i]);
    }
  }

  if (restore) g_grad_enabled = prev;
  return res;
}

}  // namespace

void backward(const Var& root) {
  EngineResult res = run_engine(root, {}, false, false);
  for (auto& [node, gv] : res.grads) {
    if (!node->is_leaf() || !node->requires_grad) continue;
    if (node->grad.empty()) node->grad = Tensor(node->value.shape());
    K().vadd(node->grad.data(), node->grad.data(), gv->value.data(),
             static_cast<size_t>(node->grad.numel()));
  }
}

std::vector<Var> grad(const Var& root, const std::vector<Var>& wrt,
                      bool create_graph) {
  EngineResult res = run_engine(root, wrt, true, create_graph);
  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const auto& v : wrt) {
    auto it = res.grads.find(v.get());
    out.push_back(it == res.grads.end() ? nullptr : it->second);
  }
  return out;
}

}  // namespace audioinv::ag
