#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "core/autograd.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

using audioinv::Rng;
using audioinv::Tensor;
namespace ag = audioinv::ag;

namespace {

Tensor rand_tensor(Rng& rng, std::vector<int64_t> shape, float lo = -1.0f,
                   float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform_f(lo, hi);
  return t;
}

// central-difference check of d f / d inputs[idx]
void check_grad(const std::function<ag::Var(const std::vector<ag::Var>&)>& f,
                std::vector<Tensor> inputs, double tol = 2e-2, float eps = 1e-3f) {
  std::vector<ag::Var> vars;
  vars.reserve(inputs.size());
  for (auto& t : inputs) vars.push_back(ag::leaf(t, true));
  ag::Var out = f(vars);
  REQUIRE(out->value.numel() == 1);
  auto grads = ag::grad(out, vars, false);

  for (size_t vi = 0; vi < vars.size(); ++vi) {
    REQUIRE(grads[vi] != nullptr);
    const Tensor& g = grads[vi]->value;
    for (int64_t j = 0; j < inputs[vi].numel(); ++j) {
      Tensor& t = inputs[vi];
      const float orig = t[j];
      t[j] = orig + eps;
      std::vector<ag::Var> vp;
      for (auto& tt : inputs) vp.push_back(ag::constant(tt));
      const double fp = f(vp)->value[0];
      t[j] = orig - eps;
      std::vector<ag::Var> vm;
      for (auto& tt : inputs) vm.push_back(ag::constant(tt));
      const double fm = f(vm)->value[0];
      t[j] = orig;
      const double num = (fp - fm) / (2.0 * eps);
      const double got = g[j];
      const double scale = std::max({1.0, std::fabs(num), std::fabs(got)});
      INFO("input ", vi, " element ", j, ": numeric ", num, " autodiff ", got);
      CHECK(std::fabs(num - got) <= tol * scale);
    }
  }
}

}  // namespace

TEST_CASE("elementwise op gradients") {
  Rng rng(11);
  auto a = rand_tensor(rng, {3, 4}, 0.2f, 1.5f);
  auto b = rand_tensor(rng, {3, 4}, 0.2f, 1.5f);

  check_grad([](const std::vector<ag::Var>& v) { return ag::mean_all(ag::add(v[0], v[1])); },
             {a, b});
  check_grad([](const std::vector<ag::Var>& v) { return ag::mean_all(ag::sub(v[0], v[1])); },
             {a, b});
  check_grad([](const std::vector<ag::Var>& v) { return ag::mean_all(ag::mul(v[0], v[1])); },
             {a, b});
  check_grad(
      [](const std::vector<ag::Var>& v) { return ag::sum_all(ag::mul_scalar(v[0], -2.5f)); },
      {a});
  check_grad([](const std::vector<ag::Var>& v) { return ag::sum_all(ag::tanh_(v[0])); }, {a});
  check_grad(
      [](const std::vector<ag::Var>& v) { return ag::sum_all(ag::leaky_relu(v[0], 0.2f)); },
      {a});
  check_grad([](const std::vector<ag::Var>& v) { return ag::sum_all(ag::sqrt_(v[0])); }, {a});
  check_grad([](const std::vector<ag::Var>& v) { return ag::sum_all(ag::square(v[0])); }, {a});
  check_grad([](const std::vector<ag::Var>& v) { return ag::sum_sq(v[0]); }, {a});
  check_grad(
      [](const std::vector<ag::Var>& v) { return ag::sum_all(ag::log_floor(v[0], 1e-6f)); },
      {a});
  check_grad(
      [](const std::vector<ag::Var>& v) { return ag::sum_all(ag::magnitude(v[0], v[1], 1e-14f)); },
      {a, b});
  // abs away from the kink
  check_grad([](const std::vector<ag::Var>& v) { return ag::sum_all(ag::abs_(v[0])); }, {a});
}

TEST_CASE("matmul gradients, all transpose modes") {
  Rng rng(13);
  auto a = rand_tensor(rng, {3, 5});
  auto b = rand_tensor(rng, {5, 2});
  check_grad(
      [](const std::vector<ag::Var>& v) { return ag::sum_sq(ag::matmul(v[0], v[1])); },
      {a, b});
  auto at = rand_tensor(rng, {5, 3});
  check_grad(
      [](const std::vector<ag::Var>& v) {
        return ag::sum_sq(ag::matmul(v[0], v[1], true, false));
      },
      {at, b});
  auto bt = rand_tensor(rng, {2, 5});
  check_grad(
      [](const std::vector<ag::Var>& v) {
        return ag::sum_sq(ag::matmul(v[0], v[1], false, true));
      },
      {a, bt});
}

TEST_CASE("conv1d / conv1d_transpose gradients and adjointness") {
  Rng rng(17);
  auto x = rand_tensor(rng, {2, 3, 12});
  auto w = rand_tensor(rng, {4, 3, 5});
  check_grad(
      [](const std::vector<ag::Var>& v) { return ag::sum_sq(ag::conv1d(v[0], v[1], 2, 2)); },
      {x, w});

  auto xt = rand_tensor(rng, {2, 4, 6});
  check_grad(
      [](const std::vector<ag::Var>& v) {
        return ag::sum_sq(ag::conv1d_transpose(v[0], v[1], 2, 2));
      },
      {xt, w});

  // <conv(x), y> == <x, convT(y)> on shapes where the stride divides exactly
  auto xa = rand_tensor(rng, {2, 3, 13});
  auto y = rand_tensor(rng, {2, 4, 7});
  ag::NoGradGuard ng;
  ag::Var cx = ag::conv1d(ag::constant(xa), ag::constant(w), 2, 2);
  ag::Var cty = ag::conv1d_transpose(ag::constant(y), ag::constant(w), 2, 2);
  REQUIRE(cx->value.same_shape(y));
  REQUIRE(cty->value.same_shape(xa));
  double lhs = 0, rhs = 0;
  for (int64_t i = 0; i < y.numel(); ++i) lhs += (double)cx->value[i] * y[i];
  for (int64_t i = 0; i < xa.numel(); ++i) rhs += (double)cty->value[i] * xa[i];
  CHECK(std::fabs(lhs - rhs) <= 1e-3 * std::max(1.0, std::fabs(lhs)));
}

TEST_CASE("conv2d gradients (floor division shapes)") {
  Rng rng(19);
  auto x = rand_tensor(rng, {2, 2, 7, 9});
  auto w = rand_tensor(rng, {3, 2, 3, 3});
  check_grad(
      [](const std::vector<ag::Var>& v) { return ag::sum_sq(ag::conv2d(v[0], v[1], 2, 1)); },
      {x, w});
}

TEST_CASE("bias, pooling, framing, shifting gradients") {
  Rng rng(23);
  auto x = rand_tensor(rng, {2, 3, 4});
  auto b = rand_tensor(rng, {3});
  check_grad(
      [](const std::vector<ag::Var>& v) { return ag::sum_sq(ag::bias_add(v[0], v[1])); },
      {x, b});

  auto x4 = rand_tensor(rng, {2, 3, 4, 5});
  check_grad(
      [](const std::vector<ag::Var>& v) { return ag::sum_sq(ag::global_avg_pool2d(v[0])); },
      {x4});

  auto sig = rand_tensor(rng, {2, 32});
  check_grad(
      [](const std::vector<ag::Var>& v) { return ag::sum_sq(ag::frame_signal(v[0], 8, 4)); },
      {sig});

  auto fm = rand_tensor(rng, {2, 2, 10});
  std::vector<int> shifts = {2, -1, 0, 3};
  check_grad(
      [&shifts](const std::vector<ag::Var>& v) {
        return ag::sum_sq(ag::time_shift_reflect(v[0], shifts));
      },
      {fm});
}

TEST_CASE("softmax cross entropy gradient") {
  Rng rng(29);
  auto logits = rand_tensor(rng, {4, 5}, -2.0f, 2.0f);
  std::vector<int> labels = {0, 3, 2, 4};
  check_grad(
      [&labels](const std::vector<ag::Var>& v) {
        return ag::softmax_cross_entropy(v[0], labels);
      },
      {logits}, 2e-2, 5e-3f);
}

TEST_CASE("grad() prunes paths and reports independence") {
  auto a = ag::leaf(Tensor::scalar(2.0f), true);
  auto b = ag::leaf(Tensor::scalar(3.0f), true);
  auto c = ag::mul(a, a);  // no dependence on b
  auto gs = ag::grad(c, {a, b}, false);
  REQUIRE(gs[0] != nullptr);
  CHECK(gs[0]->value[0] == doctest::Approx(4.0f));
  CHECK(gs[1] == nullptr);
}

TEST_CASE("backward accumulates into leaf grads") {
  auto a = ag::leaf(Tensor::scalar(1.5f), true);
  auto loss = ag::sum_sq(ag::mul_scalar(a, 2.0f));  // (2a)^2 -> d/da = 8a
  ag::backward(loss);
  REQUIRE(!a->grad.empty());
  CHECK(a->grad[0] == doctest::Approx(12.0f));
  ag::backward(loss);  // accumulates
  CHECK(a->grad[0] == doctest::Approx(24.0f));
}

TEST_CASE("second-order: gradient penalty derivative matches finite differences") {
  // toy critic: scalar output from conv1d -> leaky -> shift -> matmul
  Rng rng(31);
  auto w_conv = rand_tensor(rng, {2, 1, 3});
  auto w_lin = rand_tensor(rng, {1, 12});
  auto x_in = rand_tensor(rng, {1, 1, 12});
  std::vector<int> shifts = {1, -2};

  auto penalty = [&](const Tensor& wc, const Tensor& wl) -> double {
    ag::Var wcv = ag::leaf(wc, true);
    ag::Var wlv = ag::leaf(wl, true);
    ag::Var x = ag::leaf(x_in, true);
    ag::Var h = ag::conv1d(x, wcv, 2, 1);           // [1,2,6]
    h = ag::leaky_relu(h, 0.2f);
    h = ag::time_shift_reflect(h, shifts);
    h = ag::reshape(h, {1, 12});
    ag::Var out = ag::sum_all(ag::matmul(h, wlv, false, true));
    auto gx = ag::grad(out, {x}, true);
    ag::Var gnorm = ag::sqrt_(ag::sum_sq(gx[0]));
    ag::Var p = ag::square(ag::add_scalar(gnorm, -1.0f));
    return p->value[0];
  };

  // analytic gradient of the penalty wrt both weight tensors
  ag::Var wcv = ag::leaf(w_conv, true);
  ag::Var wlv = ag::leaf(w_lin, true);
  ag::Var x = ag::leaf(x_in, true);
  ag::Var h = ag::conv1d(x, wcv, 2, 1);
  h = ag::leaky_relu(h, 0.2f);
  h = ag::time_shift_reflect(h, shifts);
  h = ag::reshape(h, {1, 12});
  ag::Var out = ag::sum_all(ag::matmul(h, wlv, false, true));
  auto gx = ag::grad(out, {x}, true);
  ag::Var gnorm = ag::sqrt_(ag::sum_sq(gx[0]));
  ag::Var p = ag::square(ag::add_scalar(gnorm, -1.0f));
  auto gw = ag::grad(p, {wcv, wlv}, false);
  REQUIRE(gw[0] != nullptr);
  REQUIRE(gw[1] != nullptr);

  const float eps = 2e-3f;
  for (int64_t j = 0; j < w_conv.numel(); ++j) {
    Tensor wp = w_conv, wm = w_conv;
    wp[j] += eps;
    wm[j] -= eps;
    const double num = (penalty(wp, w_lin) - penalty(wm, w_lin)) / (2.0 * eps);
    const double got = gw[0]->value[j];
    const double scale = std::max({1.0, std::fabs(num), std::fabs(got)});
    INFO("w_conv[", j, "]: numeric ", num, " autodiff ", got);
    CHECK(std::fabs(num - got) <= 3e-2 * scale);
  }
  for (int64_t j = 0; j < w_lin.numel(); ++j) {
    Tensor wp = w_lin, wm = w_lin;
    wp[j] += eps;
    wm[j] -= eps;
    const double num = (penalty(w_conv, wp) - penalty(w_conv, wm)) / (2.0 * eps);
    const double got = gw[1]->value[j];
    const double scale = std::max({1.0, std::fabs(num), std::fabs(got)});
    INFO("w_lin[", j, "]: numeric ", num, " autodiff ", got);
    CHECK(std::fabs(num - got) <= 3e-2 * scale);
  }
}
