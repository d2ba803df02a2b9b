#include "invert/inverse_mapper.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "classifier/metrics.hpp"

namespace audioinv::inv {

using json = nlohmann::json;

InverseMapper::InverseMapper(clf::ResNetConfig cfg, int64_t latent_dim,
                             uint64_t init_seed)
    : latent_dim_(latent_dim) {
  if (latent_dim <= 0) throw std::invalid_argument("inverse_mapper: latent_dim must be > 0");
  Rng rng(init_seed ^ 0x1417e47ULL);
  body_ = clf::ResNetBody(params_, cfg, rng);
  head_ = nn::Linear(params_, "fc", body_.out_channels(), latent_dim, rng);
}

ag::Var InverseMapper::forward(const ag::Var& x) const {
  return head_.forward(body_.forward(x));
}

gan::LatentVector InverseMapper::predict(const audio::Spectrogram& s) const {
  ag::NoGradGuard ng;
  ag::Var out = forward(ag::constant(clf::DigitClassifier::spec_to_input(s)));
  gan::LatentVector z;
  z.values.assign(out->value.data(), out->value.data() + out->value.numel());
  return z;
}

void InverseMapper::save_checkpoint(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  nn::save_params(params_, dir + "/params.bin");
  const auto& cfg = body_.config();
  json m;
  m["type"] = "inverse_mapper";
  m["latent_dim"] = latent_dim_;
  m["width"] = cfg.width;
  m["blocks_per_stage"] = cfg.blocks_per_stage;
  m["in_h"] = cfg.in_h;
  m["in_w"] = cfg.in_w;
  m["input_shift"] = cfg.input_shift;
  m["input_scale"] = cfg.input_scale;
  m["params_fingerprint"] = nn::params_fingerprint(params_);
  std::ofstream os(dir + "/manifest.json");
  os << m.dump(2) << "\n";
  if (!os) throw std::runtime_error("inverse_mapper: cannot write manifest in " + dir);
}

InverseMapper InverseMapper::load_checkpoint(const std::string& dir) {
  std::ifstream is(dir + "/manifest.json");
  if (!is) throw std::runtime_error("inverse_mapper: missing manifest in " + dir);
  json m = json::parse(is);
  if (m.value("type", "") != "inverse_mapper")
    throw std::runtime_error("inverse_mapper: manifest type mismatch in " + dir);
  clf::ResNetConfig cfg;
  cfg.width = m.at("width").get<int64_t>();
  cfg.blocks_per_stage = m.at("blocks_per_stage").get<int64_t>();
  cfg.in_h = m.at("in_h").get<int64_t>();
  cfg.in_w = m.at("in_w").get<int64_t>();
  cfg.input_shift = m.at("input_shift").get<float>();
  cfg.input_scale = m.at("input_scale").get<float>();
  InverseMapper im(cfg, m.at("latent_dim").get<int64_t>(), 0);
  nn::load_params(im.params_, dir + "/params.bin");
  return im;
}

void InverterTrainConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0)
    throw std::invalid_argument("train_inverter: epochs and batch_size must be > 0");
  if (!(lr > 0.0f)) throw std::invalid_argument("train_inverter: lr must be > 0");
  if (lambda_latent < 0.0f || lambda_perc < 0.0f)
    throw std::invalid_argument("train_inverter: loss weights must be >= 0");
  if (lambda_latent == 0.0f && lambda_perc == 0.0f)
    throw std::invalid_argument("train_inverter: at least one loss weight must be > 0");
}

namespace {

struct FrozenGuard {
  nn::ParamSet& ps;
  explicit FrozenGuard(nn::ParamSet& p) : ps(p) { ps.set_requires_grad(false); }
  ~FrozenGuard() { ps.set_requires_grad(true); }
};

}  // namespace

InverterTrainLog train_inverter(InverseMapper& m, gan::Generator& g,
                                clf::DigitClassifier& c,
                                const std::vector<audio::AudioClip>& real,
                                const InverterTrainConfig& cfg, Rng& rng,
                                const audio::SpectrogramConfig& scfg) {
  cfg.validate();
  if (real.empty()) throw std::invalid_argument("train_inverter: empty real dataset");
  const int64_t d = g.config().latent_dim;
  if (m.latent_dim() != d)
    throw std::invalid_argument("train_inverter: mapper/generator latent dim mismatch");
  const int64_t length = g.config().output_length;
  const audio::DftBasis basis = audio::make_dft_basis(scfg);
  const int64_t frames = scfg.frames_for(length);
  const int64_t bins = scfg.bins();
  if (m.body_config().in_h != frames || m.body_config().in_w != bins)
    throw std::invalid_argument("train_inverter: mapper input shape mismatch");

  // only the mapper trains; generator and classifier are feature providers
  FrozenGuard freeze_g(g.params());
  FrozenGuard freeze_c(c.params());

  nn::AdamConfig ac;
  ac.lr = cfg.lr;
  nn::Adam opt(m.params().vars(), ac);

  InverterTrainLog log;
  log.real_loss.reserve(static_cast<size_t>(cfg.epochs));
  log.fake_loss.reserve(static_cast<size_t>(cfg.epochs));

  const int64_t bs = cfg.batch_size;

  auto spec4 = [&](const ag::Var& wave) {
    ag::Var s = audio::spectrogram_var(wave, scfg, basis);
    return ag::reshape(s, {s->value.dim(0), 1, frames, bins});
  };

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // real branch: perceptual loss only; skipped when its weight is zero
    if (cfg.lambda_perc > 0.0f) {
      Tensor wave({bs, length});
      for (int64_t b = 0; b < bs; ++b) {
        const auto& clip = real[rng.next_below(real.size())];
        if (clip.length() != length)
          throw std::invalid_argument("train_inverter: real clip length mismatch");
        std::copy(clip.samples.begin(), clip.samples.end(), wave.data() + b * length);
      }
      ag::Var target_spec = spec4(ag::constant(std::move(wave)));
      ag::Var z_hat = m.forward(target_spec);
      ag::Var rec_spec = spec4(g.forward(z_hat));
      ag::Var loss = ag::mul_scalar(
          clf::perceptual_loss_var(c, target_spec, rec_spec, cfg.perc_mean_per_block),
          cfg.lambda_perc);
      const float lv = loss->value[0];
      if (!std::isfinite(lv))
        throw std::runtime_error("train_inverter: non-finite real-branch loss at epoch " +
                                 std::to_string(epoch));
      log.real_loss.push_back(lv);
      ag::backward(loss);
      opt.step();
    }

    // fake branch: fresh latents, latent MSE plus perceptual
    {
      Tensor z({bs, d});
      for (int64_t i = 0; i < z.numel(); ++i) z[i] = rng.uniform_f(-1.0f, 1.0f);
      Tensor fake_wave = g.generate_batch(z);
      ag::Var target_spec = spec4(ag::constant(std::move(fake_wave)));
      ag::Var z_hat = m.forward(target_spec);
      ag::Var latent_mse = ag::mean_all(ag::square(ag::sub(z_hat, ag::constant(z))));
      ag::Var loss = ag::mul_scalar(latent_mse, cfg.lambda_latent);
      if (cfg.lambda_perc > 0.0f) {
        ag::Var rec_spec = spec4(g.forward(z_hat));
        ag::Var perc = clf::perceptual_loss_var(c, target_spec, rec_spec,
                                                cfg.perc_mean_per_block);
        loss = ag::add(loss, ag::mul_scalar(perc, cfg.lambda_perc));
      }
      const float lv = loss->value[0];
      if (!std::isfinite(lv))
        throw std::runtime_error("train_inverter: non-finite fake-branch loss at epoch " +
                                 std::to_string(epoch));
      log.fake_loss.push_back(lv);
      log.fake_latent_mse.push_back(latent_mse->value[0]);
      ag::backward(loss);
      opt.step();
    }
  }
  return log;
}

InversionResult invert_mapper(const InverseMapper& m, const gan::Generator& g,
                              const audio::AudioClip& target, Rng& rng,
                              const audio::SpectrogramConfig& scfg,
                              bool log_spectrogram) {
  GdConfig cfg;
  cfg.max_steps = 0;
  cfg.log_spectrogram = log_spectrogram;
  cfg.has_init = true;
  cfg.restart_on_stall = false;
  cfg.init = m.predict(audio::spectrogram(target, scfg)).values;
  InversionResult res = invert_gd(g, target, cfg, rng, scfg);
  res.method = "mapper";
  return res;
}

InversionResult invert_hybrid(const InverseMapper& m, const gan::Generator& g,
                              const audio::AudioClip& target, const GdConfig& cfg,
                              Rng& rng, const audio::SpectrogramConfig& scfg) {
  GdConfig h = cfg;
  h.has_init = true;
  h.restart_on_stall = false;  // refine the prediction, never leave its basin
  h.init = m.predict(audio::spectrogram(target, scfg)).values;
  InversionResult res = invert_gd(g, target, h, rng, scfg);
  res.method = "hybrid";
  return res;
}

}  // namespace audioinv::inv
