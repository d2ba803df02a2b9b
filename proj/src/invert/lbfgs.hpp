#pragma once

#include <functional>
#include <vector>

namespace audioinv::opt {

// Limited-memory BFGS with Armijo backtracking. Double-precision state so
// curvature bookkeeping stays well conditioned even when the objective is
// evaluated in float.

struct LbfgsOptions {
  int max_iters = 1000;
  int history = 10;
  double tol_obj = 1e-8;    // relative |f_k - f_{k-1}|
  double tol_grad = 1e-10;  // gradient infinity norm
  int max_linesearch = 30;
  double armijo_c = 1e-4;
};

enum class LbfgsStop {
  AlreadyOptimal,
  MaxIters,
  ObjectiveTol,
  GradientTol,
  LineSearchFail,
};

struct LbfgsSummary {
  double f = 0.0;
  LbfgsStop stop = LbfgsStop::MaxIters;
  int iters = 0;
};

// fg: evaluates f(x) and writes the gradient into g (same size as x).
// on_iterate: called after every accepted step with (iter, x, f); may mutate
// x in place (e.g. latent clipping) and must return true when it did, which
// re-evaluates the objective and drops the curvature memory.
LbfgsSummary lbfgs_minimize(
    const std::function<double(const std::vector<double>&, std::vector<double>&)>& fg,
    std::vector<double>& x, const LbfgsOptions& opts,
    const std::function<bool(int, std::vector<double>&, double)>& on_iterate = {});

}  // namespace audioinv::opt
