#include "invert/invert.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "invert/lbfgs.hpp"

namespace audioinv::inv {

using json = nlohmann::json;

ClipMode clip_mode_from_string(const std::string& s) {
  if (s == "none") return ClipMode::None;
  if (s == "hard") return ClipMode::Hard;
  if (s == "stochastic") return ClipMode::Stochastic;
  throw std::invalid_argument("unknown clip mode: " + s);
}

std::string to_string(ClipMode m) {
  switch (m) {
    case ClipMode::None: return "none";
    case ClipMode::Hard: return "hard";
    case ClipMode::Stochastic: return "stochastic";
  }
  return "none";
}

std::vector<float> stochastic_clip(const std::vector<float>& z, float lo, float hi,
                                   Rng& rng) {
  if (!(lo < hi)) throw std::invalid_argument("stochastic_clip: need lo < hi");
  std::vector<float> out = z;
  for (auto& v : out)
    if (v < lo || v > hi) v = rng.uniform_f(lo, hi);
  return out;
}

void GdConfig::validate() const {
  if (max_steps < 0) throw std::invalid_argument("invert_gd: max_steps must be >= 0");
  if (!(tol_obj >= 0.0)) throw std::invalid_argument("invert_gd: bad tol_obj");
  if (history < 1) throw std::invalid_argument("invert_gd: history must be >= 1");
}

namespace {

const char* stop_name(opt::LbfgsStop s) {
  switch (s) {
    case opt::LbfgsStop::AlreadyOptimal: return "already_optimal";
    case opt::LbfgsStop::MaxIters: return "max_steps";
    case opt::LbfgsStop::ObjectiveTol: return "objective_tol";
    case opt::LbfgsStop::GradientTol: return "gradient_tol";
    case opt::LbfgsStop::LineSearchFail: return "line_search_fail";
  }
  return "unknown";
}

}  // namespace

InversionResult invert_gd(const gan::Generator& g, const audio::AudioClip& target,
                          const GdConfig& cfg, Rng& rng,
                          const audio::SpectrogramConfig& scfg) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const int64_t d = g.config().latent_dim;
  if (target.length() != g.config().output_length)
    throw std::invalid_argument("invert_gd: target length " +
                                std::to_string(target.length()) +
                                " != generator output length " +
                                std::to_string(g.config().output_length));

  audio::SpectrogramConfig objcfg = scfg;
  objcfg.use_log = cfg.log_spectrogram;
  const audio::DftBasis basis = audio::make_dft_basis(objcfg);

  // fixed target side of the objective
  Tensor target_spec;
  {
    ag::NoGradGuard ng;
    Tensor wave({1, target.length()}, target.samples);
    target_spec =
        audio::spectrogram_var(ag::constant(std::move(wave)), objcfg, basis)->value;
  }
  const float inv_n = 1.0f / static_cast<float>(target_spec.numel());

  // mean |S(G(z)) - S(target)| and its latent gradient
  auto objective = [&](const std::vector<double>& x,
                       std::vector<double>& grad_out) -> double {
    Tensor zt({1, d});
    for (int64_t i = 0; i < d; ++i) zt[i] = static_cast<float>(x[static_cast<size_t>(i)]);
    ag::Var zv = ag::leaf(std::move(zt), true);
    ag::Var wave = g.forward(zv);
    ag::Var spec = audio::spectrogram_var(wave, objcfg, basis);
    ag::Var loss = ag::mul_scalar(
        ag::sum_all(ag::abs_(ag::sub(spec, ag::constant(target_spec)))), inv_n);
    auto gz = ag::grad(loss, {zv}, false);
    if (gz[0] == nullptr) throw std::runtime_error("invert_gd: lost latent gradient");
    for (int64_t i = 0; i < d; ++i)
      grad_out[static_cast<size_t>(i)] = gz[0]->value[i];
    const double f = loss->value[0];
    if (!std::isfinite(f))
      throw std::runtime_error("invert_gd: non-finite objective");
    return f;
  };

  // init
  std::vector<float> z0;
  if (cfg.has_init) {
    if (static_cast<int64_t>(cfg.init.size()) != d)
      throw std::invalid_argument("invert_gd: init dimension mismatch");
    z0 = cfg.init;
  } else {
    z0 = gan::sample_latent(rng, d).values;
  }

  std::vector<double> x(z0.begin(), z0.end());
  std::vector<double> gscratch(x.size());
  const double f0 = objective(x, gscratch);

  InversionResult res;
  res.method = "gradient";
  res.initial_loss = f0;
  res.raw_trace.push_back(f0);
  res.loss_trace.push_back(f0);

  std::vector<double> best_x = x;
  double best_f = f0;
  int64_t best_step = 0;
  int64_t step_counter = 0;  // global across restarts

  if (f0 == 0.0 || cfg.max_steps == 0) {
    res.stop_reason = f0 == 0.0 ? "objective_zero_at_init" : "zero_step_budget";
  } else {
    auto callback = [&](int /*iter*/, std::vector<double>& xi, double fi) -> bool {
      ++step_counter;
      res.raw_trace.push_back(fi);
      if (fi < best_f) {
        best_f = fi;
        best_x = xi;
        best_step = step_counter;
      }
      res.loss_trace.push_back(best_f);
      if (cfg.clip_mode == ClipMode::None) return false;
      bool mutated = false;
      for (auto& v : xi) {
        if (v < -1.0 || v > 1.0) {
          v = cfg.clip_mode == ClipMode::Hard
                  ? std::clamp(v, -1.0, 1.0)
                  : rng.uniform(-1.0, 1.0);
          mutated = true;
        }
      }
      return mutated;
    };

    int starts = 0;
    for (;;) {
      const int64_t remaining = cfg.max_steps - step_counter;
      if (remaining <= 0) {
        res.stop_reason = "max_steps";
        break;
      }
      opt::LbfgsOptions lopts;
      lopts.max_iters = static_cast<int>(remaining);
      lopts.history = cfg.history;
      lopts.tol_obj = cfg.tol_obj;
      opt::LbfgsSummary sum = opt::lbfgs_minimize(objective, x, lopts, callback);
      res.stop_reason = stop_name(sum.stop);
      ++starts;
      if (sum.stop == opt::LbfgsStop::MaxIters) break;
      if (!cfg.restart_on_stall || best_f <= 1e-12) break;
      if (step_counter >= cfg.max_steps) break;
      // stalled with budget left: re-seed and record the fresh evaluation
      // as one step so the trace stays aligned with the budget
      for (auto& v : x) v = rng.uniform(-1.0, 1.0);
      const double fr = objective(x, gscratch);
      callback(0, x, fr);
      res.stop_reason = "restarted";
    }
    res.restarts = starts - 1;
  }

  res.z_hat.resize(static_cast<size_t>(d));
  for (int64_t i = 0; i < d; ++i)
    res.z_hat[static_cast<size_t>(i)] = static_cast<float>(best_x[static_cast<size_t>(i)]);
  res.final_loss = best_f;
  res.steps_used = best_step;

  gan::LatentVector zbest;
  zbest.values = res.z_hat;
  res.reconstruction = g.generate(zbest);
  res.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

void write_result_sidecar(const std::string& path, const InversionResult& result,
                          uint64_t seed, const std::string& config_hash) {
  json j;
  j["method"] = result.method;
  j["z_hat"] = result.z_hat;
  j["loss_trace"] = result.loss_trace;
  j["raw_trace"] = result.raw_trace;
  j["steps_used"] = result.steps_used;
  j["restarts"] = result.restarts;
  j["wall_time_sec"] = result.wall_time_sec;
  j["initial_loss"] = result.initial_loss;
  j["final_loss"] = result.final_loss;
  j["stop_reason"] = result.stop_reason;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  std::ofstream os(path);
  os << j.dump(2) << "\n";
  if (!os) throw std::runtime_error("cannot write sidecar " + path);
}

}  // namespace audioinv::inv
