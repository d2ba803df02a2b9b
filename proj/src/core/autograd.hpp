#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "core/tensor.hpp"

// Define-by-run reverse-mode autodiff over Tensor. Ops record a node when
// grad mode is on and some input requires grad. Backward rules are written
// in terms of the same public ops, so a backward pass run with
// create_graph=true yields a differentiable graph (needed for the critic
// gradient penalty).

namespace audioinv::ag {

class Node;
using Var = std::shared_ptr<Node>;

class Node {
 public:
  Tensor value;
  bool requires_grad = false;

  // set by backward() on leaves
  Tensor grad;

  std::vector<Var> parents;
  // Returns per-parent gradient contributions; entries where needs[i] is
  // false may be null. gy has the node's shape.
  std::function<std::vector<Var>(const Var& gy, const std::vector<bool>& needs)>
      backward_fn;

  bool is_leaf() const { return parents.empty(); }
};

// --- graph construction -----------------------------------------------------

Var leaf(Tensor v, bool requires_grad = false);
Var constant(Tensor v);
// value copy detached from the graph
Var detach(const Var& a);

bool grad_enabled();
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  bool prev;
};

// --- elementwise / scalar ----------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, float s);
Var mul_scalar(const Var& a, float s);
Var neg(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, float slope);
Var tanh_(const Var& a);
Var abs_(const Var& a);
Var square(const Var& a);
Var sqrt_(const Var& a);
// log(max(a, floor)); zero gradient where a <= floor
Var log_floor(const Var& a, float floor_v);
// sqrt(re^2 + im^2 + tiny)
Var magnitude(const Var& re, const Var& im, float tiny);

// --- shape / broadcast -------------------------------------------------------

Var reshape(const Var& a, std::vector<int64_t> shape);
// scalar -> given shape (adjoint of sum_all)
Var broadcast_scalar(const Var& a, std::vector<int64_t> shape);
// x[B,C,...] + bias[C] on axis 1
Var bias_add(const Var& x, const Var& b);
// sum over all axes except axis 1 -> [C] (adjoint of bias broadcast)
Var sum_to_channel(const Var& x);

// --- reductions --------------------------------------------------------------

Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var sum_sq(const Var& a);

// --- linear algebra ----------------------------------------------------------

// 2-D matmul with optional transposes (ta && tb unsupported)
Var matmul(const Var& a, const Var& b, bool ta = false, bool tb = false);

// --- convolution -------------------------------------------------------------

// x[B,Ci,L], w[Co,Ci,K] -> [B,Co,(L+2p-K)/s+1]
Var conv1d(const Var& x, const Var& w, int stride, int pad);
// exact adjoint of conv1d wrt input: x[B,Co,Lo], w[Co,Ci,K] -> [B,Ci,s(Lo-1)+K-2p]
Var conv1d_transpose(const Var& x, const Var& w, int stride, int pad);
// x[B,Ci,H,W], w[Co,Ci,Kh,Kw] -> [B,Co,Ho,Wo]
Var conv2d(const Var& x, const Var& w, int stride, int pad);
// adjoint of conv2d wrt input
Var conv2d_transpose(const Var& x, const Var& w, int stride, int pad);

// --- pooling -----------------------------------------------------------------

// [B,C,H,W] -> [B,C]
Var global_avg_pool2d(const Var& x);

// --- signal ------------------------------------------------------------------

// x[B,L] -> frames [B,F,W], F = 1 + (L-W)/hop (no end padding)
Var frame_signal(const Var& x, int window, int hop);
// per-(batch,channel) circular-free integer time shift with reflection fill;
// shifts.size() == B*C, |shift| < T
Var time_shift_reflect(const Var& x, const std::vector<int>& shifts);

// --- losses ------------------------------------------------------------------

// mean over batch of -log softmax(logits)[label]; backward is first-order
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels);

// --- engine ------------------------------------------------------------------

// Accumulate d(root)/d(leaf) into .grad of every reachable leaf that
// requires grad. root must be scalar.
void backward(const Var& root);

// d(root)/d(wrt[i]) without touching .grad. With create_graph the returned
// Vars carry a differentiable graph. Entries are null when root does not
// depend on wrt[i].
std::vector<Var> grad(const Var& root, const std::vector<Var>& wrt,
                      bool create_graph);

}  // namespace audioinv::ag
