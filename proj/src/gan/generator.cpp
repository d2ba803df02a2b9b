#include "gan/generator.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace audioinv::gan {

using json = nlohmann::json;

LatentVector sample_latent(Rng& rng, int64_t d) {
  if (d <= 0) throw std::invalid_argument("sample_latent: d must be > 0");
  LatentVector z;
  z.values.resize(static_cast<size_t>(d));
  for (auto& v : z.values) v = rng.uniform_f(-1.0f, 1.0f);
  return z;
}

std::vector<int> draw_phase_shifts(int64_t count, int n, Rng& rng) {
  if (n < 0) throw std::invalid_argument("phase_shuffle: n must be >= 0");
  std::vector<int> shifts(static_cast<size_t>(count));
  for (auto& s : shifts)
    s = n == 0 ? 0 : static_cast<int>(rng.uniform_int(-n, n));
  return shifts;
}

ag::Var phase_shuffle(const ag::Var& x, int n, Rng& rng) {
  if (x->value.ndim() != 3)
    throw std::invalid_argument("phase_shuffle: expects [B,C,T]");
  if (n >= x->value.dim(2))
    throw std::invalid_argument("phase_shuffle: n larger than time dimension");
  auto shifts = draw_phase_shifts(x->value.dim(0) * x->value.dim(1), n, rng);
  return ag::time_shift_reflect(x, shifts);
}

Tensor phase_shuffle(const Tensor& x, int n, Rng& rng) {
  ag::NoGradGuard ng;
  return phase_shuffle(ag::constant(x), n, rng)->value;
}

int64_t GeneratorConfig::upsample_layers() const {
  int64_t len = start_len;
  int64_t n = 0;
  while (len < output_length) {
    len *= stride;
    ++n;
  }
  return n;
}

void GeneratorConfig::validate() const {
  if (latent_dim <= 0) throw std::invalid_argument("generator: latent_dim must be > 0");
  if (model_dim <= 0) throw std::invalid_argument("generator: model_dim must be > 0");
  if (kernel % stride != 0)
    throw std::invalid_argument("generator: kernel must be a multiple of stride");
  int64_t len = start_len;
  for (int64_t i = 0; i < upsample_layers(); ++i) len *= stride;
  if (len != output_length)
    throw std::invalid_argument(
        "generator: output_length must be start_len * stride^k");
}

namespace {

// channel plan: start at model_dim * 2^(n-1), halve per layer, emit 1
std::vector<int64_t> generator_channels(const GeneratorConfig& cfg) {
  const int64_t n = cfg.upsample_layers();
  std::vector<int64_t> ch(static_cast<size_t>(n + 1));
  for (int64_t i = 0; i < n; ++i) ch[static_cast<size_t>(i)] = cfg.model_dim << (n - 1 - i);
  ch[static_cast<size_t>(n)] = 1;
  return ch;
}

int conv_pad(const GeneratorConfig& cfg) {
  // stride-4, kernel-24 transpose layers quadruple the length exactly when
  // pad = (kernel - stride) / 2
  return static_cast<int>((cfg.kernel - cfg.stride) / 2);
}

}  // namespace

Generator::Generator(GeneratorConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(init_seed);
  const auto ch = generator_channels(cfg_);
  stem_ = nn::Linear(params_, "stem", cfg_.latent_dim, ch[0] * cfg_.start_len, rng);
  const int pad = conv_pad(cfg_);
  for (size_t i = 0; i + 1 < ch.size(); ++i)
    ups_.emplace_back(params_, "up" + std::to_string(i), ch[i], ch[i + 1],
                      cfg_.kernel, cfg_.stride, pad, rng);
}

ag::Var Generator::forward(const ag::Var& z) const {
  if (z->value.ndim() != 2 || z->value.dim(1) != cfg_.latent_dim)
    throw std::invalid_argument("generator: z must be [B," +
                                std::to_string(cfg_.latent_dim) + "], got " +
                                z->value.shape_str());
  const int64_t batch = z->value.dim(0);
  const auto ch = generator_channels(cfg_);
  ag::Var h = stem_.forward(z);
  h = ag::reshape(h, {batch, ch[0], cfg_.start_len});
  h = ag::relu(h);
  for (size_t i = 0; i < ups_.size(); ++i) {
    h = ups_[i].forward(h);
    if (i + 1 < ups_.size()) h = ag::relu(h);
  }
  h = ag::tanh_(h);
  return ag::reshape(h, {batch, cfg_.output_length});
}

audio::AudioClip Generator::generate(const LatentVector& z) const {
  if (z.dim() != cfg_.latent_dim)
    throw std::invalid_argument("generate: latent dimension mismatch");
  ag::NoGradGuard ng;
  Tensor zt({1, cfg_.latent_dim}, z.values);
  ag::Var wave = forward(ag::constant(std::move(zt)));
  audio::AudioClip clip;
  clip.samples.assign(wave->value.data(), wave->value.data() + wave->value.numel());
  return clip;
}

Tensor Generator::generate_batch(const Tensor& z) const {
  ag::NoGradGuard ng;
  return forward(ag::constant(z))->value;
}

void Generator::save_checkpoint(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  nn::save_params(params_, dir + "/params.bin");
  json m;
  m["type"] = "generator";
  m["latent_dim"] = cfg_.latent_dim;
  m["model_dim"] = cfg_.model_dim;
  m["output_length"] = cfg_.output_length;
  m["start_len"] = cfg_.start_len;
  m["kernel"] = cfg_.kernel;
  m["stride"] = cfg_.stride;
  m["params_fingerprint"] = nn::params_fingerprint(params_);
  std::ofstream os(dir + "/manifest.json");
  os << m.dump(2) << "\n";
  if (!os) throw std::runtime_error("generator: cannot write manifest in " + dir);
}

Generator Generator::load_checkpoint(const std::string& dir) {
  std::ifstream is(dir + "/manifest.json");
  if (!is) throw std::runtime_error("generator: missing manifest in " + dir);
  json m = json::parse(is);
  if (m.value("type", "") != "generator")
    throw std::runtime_error("generator: manifest type mismatch in " + dir);
  GeneratorConfig cfg;
  cfg.latent_dim = m.at("latent_dim").get<int64_t>();
  cfg.model_dim = m.at("model_dim").get<int64_t>();
  cfg.output_length = m.at("output_length").get<int64_t>();
  cfg.start_len = m.at("start_len").get<int64_t>();
  cfg.kernel = m.at("kernel").get<int64_t>();
  cfg.stride = m.at("stride").get<int>();
  Generator g(cfg, 0);
  nn::load_params(g.params_, dir + "/params.bin");
  return g;
}

Critic::Critic(CriticConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
  Rng rng(init_seed ^ 0x5a5a5a5aULL);
  const int pad = static_cast<int>((cfg_.kernel - cfg_.stride) / 2);
  int64_t len = cfg_.input_length;
  int64_t in_ch = 1;
  int64_t out_ch = cfg_.model_dim;
  int layer = 0;
  while (len > cfg_.end_len) {
    downs_.emplace_back(params_, "down" + std::to_string(layer), in_ch, out_ch,
                        cfg_.kernel, cfg_.stride, pad, rng);
    len /= cfg_.stride;
    in_ch = out_ch;
    out_ch *= 2;
    ++layer;
  }
  head_ = nn::Linear(params_, "head", in_ch * len, 1, rng);
}

ag::Var Critic::forward(const ag::Var& x, Rng& rng) const {
  if (x->value.ndim() != 3 || x->value.dim(1) != 1 ||
      x->value.dim(2) != cfg_.input_length)
    throw std::invalid_argument("critic: expects [B,1," +
                                std::to_string(cfg_.input_length) + "], got " +
                                x->value.shape_str());
  ag::Var h = x;
  for (size_t i = 0; i < downs_.size(); ++i) {
    h = downs_[i].forward(h);
    h = ag::leaky_relu(h, cfg_.leaky_slope);
    if (i + 1 < downs_.size() && cfg_.phase_shuffle_n > 0)
      h = phase_shuffle(h, cfg_.phase_shuffle_n, rng);
  }
  const int64_t batch = h->value.dim(0);
  h = ag::reshape(h, {batch, h->value.numel() / batch});
  return head_.forward(h);
}

}  // namespace audioinv::gan
