#include "exp/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace audioinv::exp {

using json = nlohmann::json;

ExperimentConfig default_config(const std::string& profile) {
  ExperimentConfig c;
  c.profile = profile;
  if (profile == "toy") {
    c.canonical_length = 4096;
    c.spec.window_size = 256;
    c.spec.hop = 128;

    c.gen.latent_dim = 16;
    c.gen.model_dim = 4;
    c.gen.output_length = c.canonical_length;

    c.gan_train.steps = 400;
    c.gan_train.batch_size = 16;
    c.gan_train.critic_steps = 5;

    c.clf_body.width = 8;
    c.clf_body.blocks_per_stage = 1;
    c.clf_train.steps = 800;
    c.clf_train.batch_size = 16;

    c.mapper_body.width = 8;
    c.mapper_body.blocks_per_stage = 1;
    c.inverter_train.epochs = 1000;  // one real + one fake batch each
    c.inverter_train.batch_size = 16;

    c.gd.max_steps = 1000;
    c.hybrid.max_steps = 50;

    c.num_targets = 32;
    c.workers = 2;
    c.toy_per_class = 24;
  } else if (profile == "full") {
    c.canonical_length = audio::kDefaultClipLength;  // 16384
    c.spec.window_size = 256;
    c.spec.hop = 128;

    c.gen.latent_dim = 100;
    c.gen.model_dim = 64;
    c.gen.output_length = c.canonical_length;

    c.gan_train.steps = 20000;
    c.gan_train.batch_size = 64;

    c.clf_body.width = 64;
    c.clf_body.blocks_per_stage = 2;  // 18-layer layout
    c.clf_train.steps = 20000;
    c.clf_train.batch_size = 64;

    c.mapper_body.width = 64;
    c.mapper_body.blocks_per_stage = 2;
    c.inverter_train.epochs = 250;
    c.inverter_train.batch_size = 64;

    c.gd.max_steps = 50000;
    c.hybrid.max_steps = 200;

    c.num_targets = 1000;
    c.workers = 2;
    c.toy_per_class = 256;
  } else {
    throw std::invalid_argument("unknown profile: " + profile);
  }
  c.clf_body.in_h = c.spec_frames();
  c.clf_body.in_w = c.spec_bins();
  c.mapper_body.in_h = c.spec_frames();
  c.mapper_body.in_w = c.spec_bins();
  return c;
}

void ExperimentConfig::validate() const {
  spec.validate();
  gen.validate();
  if (gen.output_length != canonical_length)
    throw std::invalid_argument("config: generator output length must equal canonical length");
  if (num_targets <= 0) throw std::invalid_argument("config: num_targets must be > 0");
  if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
  if (inception_splits < 1) throw std::invalid_argument("config: inception_splits must be >= 1");
  if (clf_body.in_h != spec_frames() || clf_body.in_w != spec_bins())
    throw std::invalid_argument("config: classifier input shape must match spectrogram");
  if (mapper_body.in_h != spec_frames() || mapper_body.in_w != spec_bins())
    throw std::invalid_argument("config: mapper input shape must match spectrogram");
  gd.validate();
  hybrid.validate();
  inverter_train.validate();
}

namespace {

void apply_overrides(ExperimentConfig& c, const json& j) {
  c.seed = j.value("seed", c.seed);
  c.out_dir = j.value("out_dir", c.out_dir);
  if (j.contains("audio")) {
    const auto& a = j["audio"];
    c.canonical_length = a.value("canonical_length", c.canonical_length);
    c.spec.window_size = a.value("window_size", c.spec.window_size);
    c.spec.hop = a.value("hop", c.spec.hop);
    c.spec.log_floor = a.value("log_floor", c.spec.log_floor);
    c.spec.use_log = a.value("use_log", c.spec.use_log);
  }
  if (j.contains("generator")) {
    const auto& g = j["generator"];
    c.gen.latent_dim = g.value("latent_dim", c.gen.latent_dim);
    c.gen.model_dim = g.value("model_dim", c.gen.model_dim);
    c.gen.start_len = g.value("start_len", c.gen.start_len);
    c.gen.kernel = g.value("kernel", c.gen.kernel);
    c.gen.stride = g.value("stride", c.gen.stride);
    c.gen.output_length = c.canonical_length;
  }
  if (j.contains("gan_train")) {
    const auto& t = j["gan_train"];
    c.gan_train.steps = t.value("steps", c.gan_train.steps);
    c.gan_train.batch_size = t.value("batch_size", c.gan_train.batch_size);
    c.gan_train.lr = t.value("lr", c.gan_train.lr);
    c.gan_train.gp_weight = t.value("gp_weight", c.gan_train.gp_weight);
    c.gan_train.critic_steps = t.value("critic_steps", c.gan_train.critic_steps);
    c.critic_phase_shuffle_n = t.value("phase_shuffle_n", c.critic_phase_shuffle_n);
  }
  if (j.contains("classifier")) {
    const auto& k = j["classifier"];
    c.num_classes = k.value("num_classes", c.num_classes);
    c.clf_body.width = k.value("width", c.clf_body.width);
    c.clf_body.blocks_per_stage = k.value("blocks_per_stage", c.clf_body.blocks_per_stage);
    c.clf_train.steps = k.value("steps", c.clf_train.steps);
    c.clf_train.batch_size = k.value("batch_size", c.clf_train.batch_size);
    c.clf_train.lr = k.value("lr", c.clf_train.lr);
  }
  if (j.contains("mapper")) {
    const auto& m = j["mapper"];
    c.mapper_body.width = m.value("width", c.mapper_body.width);
    c.mapper_body.blocks_per_stage = m.value("blocks_per_stage", c.mapper_body.blocks_per_stage);
  }
  if (j.contains("inverter_train")) {
    const auto& t = j["inverter_train"];
    c.inverter_train.epochs = t.value("epochs", c.inverter_train.epochs);
    c.inverter_train.batch_size = t.value("batch_size", c.inverter_train.batch_size);
    c.inverter_train.lr = t.value("lr", c.inverter_train.lr);
    c.inverter_train.lambda_latent = t.value("lambda_latent", c.inverter_train.lambda_latent);
    c.inverter_train.lambda_perc = t.value("lambda_perc", c.inverter_train.lambda_perc);
    c.inverter_train.perc_mean_per_block =
        t.value("perc_mean_per_block", c.inverter_train.perc_mean_per_block);
  }
  if (j.contains("gd")) {
    const auto& g = j["gd"];
    c.gd.max_steps = g.value("max_steps", c.gd.max_steps);
    c.gd.log_spectrogram = g.value("log_spectrogram", c.gd.log_spectrogram);
    c.gd.tol_obj = g.value("tol_obj", c.gd.tol_obj);
    if (g.contains("clip_mode"))
      c.gd.clip_mode = inv::clip_mode_from_string(g["clip_mode"].get<std::string>());
  }
  if (j.contains("hybrid")) {
    const auto& h = j["hybrid"];
    c.hybrid.max_steps = h.value("max_steps", c.hybrid.max_steps);
    c.hybrid.log_spectrogram = h.value("log_spectrogram", c.hybrid.log_spectrogram);
    if (h.contains("clip_mode"))
      c.hybrid.clip_mode = inv::clip_mode_from_string(h["clip_mode"].get<std::string>());
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    c.num_targets = e.value("num_targets", c.num_targets);
    c.workers = e.value("workers", c.workers);
    c.inception_splits = e.value("inception_splits", c.inception_splits);
    c.figure_count = e.value("figure_count", c.figure_count);
    c.eval_use_heldout = e.value("use_heldout", c.eval_use_heldout);
  }
  if (j.contains("data")) {
    const auto& d = j["data"];
    c.sc09_root = d.value("sc09_root", c.sc09_root);
    c.toy_per_class = d.value("toy_per_class", c.toy_per_class);
    c.heldout_fraction = d.value("heldout_fraction", c.heldout_fraction);
  }
  if (j.contains("checkpoints")) {
    const auto& k = j["checkpoints"];
    c.gan_ckpt = k.value("gan", c.gan_ckpt);
    c.classifier_ckpt = k.value("classifier", c.classifier_ckpt);
    c.mapper_ckpt = k.value("mapper", c.mapper_ckpt);
  }
  // derived shapes follow any geometry overrides
  c.gen.output_length = c.canonical_length;
  c.clf_body.in_h = c.spec_frames();
  c.clf_body.in_w = c.spec_bins();
  c.mapper_body.in_h = c.spec_frames();
  c.mapper_body.in_w = c.spec_bins();
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig c = default_config(j.value("profile", "toy"));
  apply_overrides(c, j);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return config_from_json_text(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["profile"] = c.profile;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["audio"] = {{"canonical_length", c.canonical_length},
                {"window_size", c.spec.window_size},
                {"hop", c.spec.hop},
                {"log_floor", c.spec.log_floor},
                {"use_log", c.spec.use_log}};
  j["generator"] = {{"latent_dim", c.gen.latent_dim},
                    {"model_dim", c.gen.model_dim},
                    {"start_len", c.gen.start_len},
                    {"kernel", c.gen.kernel},
                    {"stride", c.gen.stride}};
  j["gan_train"] = {{"steps", c.gan_train.steps},
                    {"batch_size", c.gan_train.batch_size},
                    {"lr", c.gan_train.lr},
                    {"gp_weight", c.gan_train.gp_weight},
                    {"critic_steps", c.gan_train.critic_steps},
                    {"phase_shuffle_n", c.critic_phase_shuffle_n}};
  j["classifier"] = {{"num_classes", c.num_classes},
                     {"width", c.clf_body.width},
                     {"blocks_per_stage", c.clf_body.blocks_per_stage},
                     {"steps", c.clf_train.steps},
                     {"batch_size", c.clf_train.batch_size},
                     {"lr", c.clf_train.lr}};
  j["mapper"] = {{"width", c.mapper_body.width},
                 {"blocks_per_stage", c.mapper_body.blocks_per_stage}};
  j["inverter_train"] = {{"epochs", c.inverter_train.epochs},
                         {"batch_size", c.inverter_train.batch_size},
                         {"lr", c.inverter_train.lr},
                         {"lambda_latent", c.inverter_train.lambda_latent},
                         {"lambda_perc", c.inverter_train.lambda_perc},
                         {"perc_mean_per_block", c.inverter_train.perc_mean_per_block}};
  j["gd"] = {{"max_steps", c.gd.max_steps},
             {"log_spectrogram", c.gd.log_spectrogram},
             {"tol_obj", c.gd.tol_obj},
             {"clip_mode", inv::to_string(c.gd.clip_mode)}};
  j["hybrid"] = {{"max_steps", c.hybrid.max_steps},
                 {"log_spectrogram", c.hybrid.log_spectrogram},
                 {"clip_mode", inv::to_string(c.hybrid.clip_mode)}};
  j["eval"] = {{"num_targets", c.num_targets},
               {"workers", c.workers},
               {"inception_splits", c.inception_splits},
               {"figure_count", c.figure_count},
               {"use_heldout", c.eval_use_heldout}};
  j["data"] = {{"sc09_root", c.sc09_root},
               {"toy_per_class", c.toy_per_class},
               {"heldout_fraction", c.heldout_fraction}};
  j["checkpoints"] = {{"gan", c.gan_ckpt},
                      {"classifier", c.classifier_ckpt},
                      {"mapper", c.mapper_ckpt}};
  return j.dump(2);
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  os << config_to_json(cfg) << "\n";
  if (!os) throw std::runtime_error("cannot write config " + path);
}

std::string config_hash(const ExperimentConfig& cfg) {
  // output location is not part of the scientific identity of a run
  ExperimentConfig scrubbed = cfg;
  scrubbed.out_dir.clear();
  const std::string s = config_to_json(scrubbed);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace audioinv::exp
