#include "invert/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace audioinv::opt {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::fabs(v));
  return m;
}

struct Pair {
  std::vector<double> s, y;
  double rho;
};

}  // namespace

LbfgsSummary lbfgs_minimize(
    const std::function<double(const std::vector<double>&, std::vector<double>&)>& fg,
    std::vector<double>& x, const LbfgsOptions& opts,
    const std::function<bool(int, std::vector<double>&, double)>& on_iterate) {
  const size_t n = x.size();
  if (n == 0) throw std::invalid_argument("lbfgs: empty variable vector");

  std::vector<double> g(n), g_new(n), x_new(n), d(n);
  double f = fg(x, g);
  if (!std::isfinite(f)) throw std::runtime_error("lbfgs: non-finite initial objective");

  LbfgsSummary sum;
  sum.f = f;
  if (inf_norm(g) <= opts.tol_grad) {
    sum.stop = LbfgsStop::AlreadyOptimal;
    return sum;
  }

  std::deque<Pair> mem;
  double gamma = 1.0;  // initial Hessian scale

  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    // two-loop recursion: d = -H g
    d = g;
    std::vector<double> alpha(mem.size());
    for (size_t i = mem.size(); i-- > 0;) {
      alpha[i] = mem[i].rho * dot(mem[i].s, d);
      for (size_t j = 0; j < n; ++j) d[j] -= alpha[i] * mem[i].y[j];
    }
    for (size_t j = 0; j < n; ++j) d[j] *= gamma;
    for (size_t i = 0; i < mem.size(); ++i) {
      const double beta = mem[i].rho * dot(mem[i].y, d);
      for (size_t j = 0; j < n; ++j) d[j] += (alpha[i] - beta) * mem[i].s[j];
    }
    for (double& v : d) v = -v;

    double gd = dot(g, d);
    if (!(gd < 0.0)) {
      // not a descent direction; fall back to steepest descent
      mem.clear();
      for (size_t j = 0; j < n; ++j) d[j] = -g[j];
      gd = dot(g, d);
    }

    // backtracking Armijo line search
    double step = mem.empty() ? std::min(1.0, 1.0 / std::max(1e-12, inf_norm(g))) : 1.0;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < opts.max_linesearch; ++ls) {
      for (size_t j = 0; j < n; ++j) x_new[j] = x[j] + step * d[j];
      f_new = fg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + opts.armijo_c * step * gd) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!mem.empty()) {
        // retry from steepest descent before giving up
        mem.clear();
        for (size_t j = 0; j < n; ++j) d[j] = -g[j];
        gd = dot(g, d);
        step = std::min(1.0, 1.0 / std::max(1e-12, inf_norm(g)));
        for (int ls = 0; ls < opts.max_linesearch; ++ls) {
          for (size_t j = 0; j < n; ++j) x_new[j] = x[j] + step * d[j];
          f_new = fg(x_new, g_new);
          if (std::isfinite(f_new) && f_new <= f + opts.armijo_c * step * gd) {
            accepted = true;
            break;
          }
          step *= 0.5;
        }
      }
      if (!accepted) {
        sum.stop = LbfgsStop::LineSearchFail;
        sum.f = f;
        sum.iters = iter - 1;
        return sum;
      }
    }

    // curvature pair
    Pair p;
    p.s.resize(n);
    p.y.resize(n);
    for (size_t j = 0; j < n; ++j) {
      p.s[j] = x_new[j] - x[j];
      p.y[j] = g_new[j] - g[j];
    }
    const double sy = dot(p.s, p.y);
    const double yy = dot(p.y, p.y);
    if (sy > 1e-10 * std::sqrt(dot(p.s, p.s)) * std::sqrt(yy)) {
      p.rho = 1.0 / sy;
      gamma = sy / std::max(yy, 1e-300);
      mem.push_back(std::move(p));
      if (static_cast<int>(mem.size()) > opts.history) mem.pop_front();
    }

    const double f_prev = f;
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    sum.iters = iter;

    if (on_iterate) {
      const bool mutated = on_iterate(iter, x, f);
      if (mutated) {
        f = fg(x, g);
        mem.clear();
        gamma = 1.0;
      }
    }

    if (inf_norm(g) <= opts.tol_grad) {
      sum.stop = LbfgsStop::GradientTol;
      sum.f = f;
      return sum;
    }
    if (std::fabs(f_prev - f) <= opts.tol_obj * std::max(1.0, std::fabs(f))) {
      sum.stop = LbfgsStop::ObjectiveTol;
      sum.f = f;
      return sum;
    }
  }
  sum.stop = LbfgsStop::MaxIters;
  sum.f = f;
  return sum;
}

}  // namespace audioinv::opt
