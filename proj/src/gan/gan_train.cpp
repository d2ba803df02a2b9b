#include "gan/gan_train.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nn/module.hpp"

namespace audioinv::gan {

namespace {

Tensor sample_real_batch(const std::vector<audio::AudioClip>& real, int64_t batch,
                         int64_t length, Rng& rng) {
  Tensor x({batch, 1, length});
  for (int64_t b = 0; b < batch; ++b) {
    const auto& clip =
        real[static_cast<size_t>(rng.next_below(static_cast<uint64_t>(real.size())))];
    if (clip.length() != length)
      throw std::invalid_argument("train_gan: clip length " +
                                  std::to_string(clip.length()) + " != generator " +
                                  std::to_string(length));
    std::copy(clip.samples.begin(), clip.samples.end(), x.data() + b * length);
  }
  return x;
}

Tensor sample_latent_batch(int64_t batch, int64_t d, Rng& rng) {
  Tensor z({batch, d});
  for (int64_t i = 0; i < z.numel(); ++i) z[i] = rng.uniform_f(-1.0f, 1.0f);
  return z;
}

// mean over batch of (||grad_x D(x_mix)||_2 - 1)^2; differentiable wrt
// critic parameters via a create-graph backward pass
ag::Var gradient_penalty(const Critic& d, const Tensor& x_real, const Tensor& x_fake,
                         Rng& rng) {
  const int64_t batch = x_real.dim(0);
  const int64_t len = x_real.dim(2);
  Tensor mix({batch, 1, len});
  for (int64_t b = 0; b < batch; ++b) {
    const float eps = rng.uniform_f(0.0f, 1.0f);
    const float* xr = x_real.data() + b * len;
    const float* xf = x_fake.data() + b * len;
    float* m = mix.data() + b * len;
    for (int64_t i = 0; i < len; ++i) m[i] = eps * xr[i] + (1.0f - eps) * xf[i];
  }
  ag::Var xv = ag::leaf(std::move(mix), true);
  ag::Var scores = d.forward(xv, rng);                 // [B,1]
  ag::Var total = ag::sum_all(scores);                 // per-example scores decouple
  auto gx = ag::grad(total, {xv}, /*create_graph=*/true);
  ag::Var g = gx[0];                                   // [B,1,L]
  ag::Var g2 = ag::square(g);
  ag::Var rows = ag::reshape(g2, {batch, len});
  ag::Var norms2 = ag::matmul(rows, ag::constant(Tensor::full({len, 1}, 1.0f)));
  ag::Var norms = ag::sqrt_(norms2);                   // [B,1]
  return ag::mean_all(ag::square(ag::add_scalar(norms, -1.0f)));
}

}  // namespace

void GanTrainConfig::validate() const {
  if (steps <= 0 || batch_size <= 0 || critic_steps <= 0)
    throw std::invalid_argument("train_gan: steps, batch_size, critic_steps must be > 0");
  if (!(lr > 0.0f) || !(gp_weight >= 0.0f))
    throw std::invalid_argument("train_gan: bad learning rate or penalty weight");
}

GanTrainLog train_gan(Generator& g, Critic& d,
                      const std::vector<audio::AudioClip>& real,
                      const GanTrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (real.empty()) throw std::invalid_argument("train_gan: empty dataset");
  const int64_t length = g.config().output_length;
  const int64_t latent = g.config().latent_dim;

  nn::AdamConfig ac;
  ac.lr = cfg.lr;
  ac.beta1 = cfg.beta1;
  ac.beta2 = cfg.beta2;
  nn::Adam opt_g(g.params().vars(), ac);
  nn::Adam opt_d(d.params().vars(), ac);

  GanTrainLog log;
  log.critic_loss.reserve(static_cast<size_t>(cfg.steps * cfg.critic_steps));
  log.gen_loss.reserve(static_cast<size_t>(cfg.steps));

  for (int64_t step = 0; step < cfg.steps; ++step) {
    // critic updates: generator weights stay put, fakes are detached
    g.set_trainable(false);
    d.set_trainable(true);
    for (int64_t ds = 0; ds < cfg.critic_steps; ++ds) {
      Tensor x_real = sample_real_batch(real, cfg.batch_size, length, rng);
      Tensor z = sample_latent_batch(cfg.batch_size, latent, rng);
      Tensor x_fake = g.generate_batch(z).reshaped({cfg.batch_size, 1, length});

      ag::Var s_real = d.forward(ag::constant(x_real), rng);
      ag::Var s_fake = d.forward(ag::constant(x_fake), rng);
      ag::Var loss = ag::sub(ag::mean_all(s_fake), ag::mean_all(s_real));
      if (cfg.gp_weight > 0.0f) {
        ag::Var gp = gradient_penalty(d, x_real, x_fake, rng);
        loss = ag::add(loss, ag::mul_scalar(gp, cfg.gp_weight));
      }
      const float lv = loss->value[0];
      if (!std::isfinite(lv))
        throw std::runtime_error("train_gan: non-finite critic loss at step " +
                                 std::to_string(step) + ", critic update " +
                                 std::to_string(ds));
      log.critic_loss.push_back(lv);
      ag::backward(loss);
      opt_d.step();
    }

    // generator update: critic frozen
    d.set_trainable(false);
    g.set_trainable(true);
    {
      Tensor z = sample_latent_batch(cfg.batch_size, latent, rng);
      ag::Var fake = g.forward(ag::leaf(std::move(z), false));
      ag::Var fake3 = ag::reshape(fake, {cfg.batch_size, 1, length});
      ag::Var loss = ag::mul_scalar(ag::mean_all(d.forward(fake3, rng)), -1.0f);
      const float lv = loss->value[0];
      if (!std::isfinite(lv))
        throw std::runtime_error("train_gan: non-finite generator loss at step " +
                                 std::to_string(step));
      log.gen_loss.push_back(lv);
      ag::backward(loss);
      opt_g.step();
    }
    d.set_trainable(true);

    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_dir.empty() &&
        (step + 1) % cfg.checkpoint_every == 0)
      g.save_checkpoint(cfg.checkpoint_dir);
  }
  if (!cfg.checkpoint_dir.empty()) g.save_checkpoint(cfg.checkpoint_dir);
  return log;
}

}  // namespace audioinv::gan
