#include "exp/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "exp/figures.hpp"
#include "gan/gan_train.hpp"

namespace audioinv::exp {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string resolve_ckpt(const ExperimentConfig& cfg, const std::string& which) {
  if (which == "gan" && !cfg.gan_ckpt.empty()) return cfg.gan_ckpt;
  if (which == "classifier" && !cfg.classifier_ckpt.empty()) return cfg.classifier_ckpt;
  if (which == "mapper" && !cfg.mapper_ckpt.empty()) return cfg.mapper_ckpt;
  return cfg.out_dir + "/checkpoints/" + which;
}

void require_ckpt(const std::string& path, const std::string& which) {
  if (!fs::exists(fs::path(path) / "manifest.json"))
    throw std::runtime_error("missing prerequisite checkpoint '" + which + "' at " +
                             path + " (run `train --target " + which + "` first)");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::string(buf);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + path);
}

}  // namespace

data::LabeledDataset load_real_dataset(const ExperimentConfig& cfg) {
  if (!cfg.sc09_root.empty())
    return data::load_sc09(cfg.sc09_root, cfg.canonical_length);
  return data::make_toy_digits(cfg.toy_per_class, cfg.canonical_length,
                               cfg.seed ^ 0x70bd1d5ULL);
}

std::string cmd_train_gan(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::string ckpt = resolve_ckpt(cfg, "gan");
  fs::create_directories(ckpt);

  data::LabeledDataset ds = load_real_dataset(cfg);
  gan::Generator g(cfg.gen, cfg.seed);
  gan::CriticConfig ccfg;
  ccfg.model_dim = cfg.gen.model_dim;
  ccfg.input_length = cfg.canonical_length;
  ccfg.end_len = cfg.gen.start_len;
  ccfg.kernel = cfg.gen.kernel;
  ccfg.stride = cfg.gen.stride;
  ccfg.phase_shuffle_n = cfg.critic_phase_shuffle_n;
  gan::Critic d(ccfg, cfg.seed);

  gan::GanTrainConfig tcfg = cfg.gan_train;
  tcfg.checkpoint_dir = ckpt;
  Rng rng(cfg.seed ^ 0x6a11ULL);
  gan::GanTrainLog log = gan::train_gan(g, d, ds.clips_only(), tcfg, rng);

  json j;
  j["critic_loss"] = log.critic_loss;
  j["gen_loss"] = log.gen_loss;
  j["seed"] = cfg.seed;
  j["config_hash"] = config_hash(cfg);
  write_text(ckpt + "/train_log.json", j.dump(2) + "\n");
  return ckpt;
}

std::string cmd_train_classifier(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::string ckpt = resolve_ckpt(cfg, "classifier");
  fs::create_directories(ckpt);

  data::LabeledDataset ds = load_real_dataset(cfg);
  std::vector<clf::LabeledSpecExample> examples;
  examples.reserve(ds.items.size());
  for (const auto& item : ds.items) {
    audio::Spectrogram s = audio::spectrogram(item.clip, cfg.spec);
    Tensor in = clf::DigitClassifier::spec_to_input(s);
    examples.push_back({in.reshaped({1, in.dim(2), in.dim(3)}), item.label});
  }

  clf::DigitClassifier c(cfg.clf_body, cfg.num_classes, cfg.seed);
  Rng rng(cfg.seed ^ 0xc1fULL);
  clf::ClassifierTrainReport report = clf::train_classifier(c, examples, cfg.clf_train, rng);
  c.save_checkpoint(ckpt);

  json j;
  j["loss_trace"] = report.loss_trace;
  j["heldout_accuracy"] = report.heldout_accuracy;
  j["heldout_count"] = report.heldout_count;
  j["seed"] = cfg.seed;
  j["config_hash"] = config_hash(cfg);
  write_text(ckpt + "/train_log.json", j.dump(2) + "\n");
  return ckpt;
}

std::string cmd_train_inverter(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::string gan_path = resolve_ckpt(cfg, "gan");
  const std::string clf_path = resolve_ckpt(cfg, "classifier");
  require_ckpt(gan_path, "gan");
  require_ckpt(clf_path, "classifier");
  const std::string ckpt = resolve_ckpt(cfg, "mapper");
  fs::create_directories(ckpt);

  gan::Generator g = gan::Generator::load_checkpoint(gan_path);
  clf::DigitClassifier c = clf::DigitClassifier::load_checkpoint(clf_path);
  data::LabeledDataset ds = load_real_dataset(cfg);

  inv::InverseMapper m(cfg.mapper_body, g.config().latent_dim, cfg.seed);
  Rng rng(cfg.seed ^ 0x111eULL);
  inv::InverterTrainLog log =
      inv::train_inverter(m, g, c, ds.clips_only(), cfg.inverter_train, rng, cfg.spec);
  m.save_checkpoint(ckpt);

  json j;
  j["real_loss"] = log.real_loss;
  j["fake_loss"] = log.fake_loss;
  j["fake_latent_mse"] = log.fake_latent_mse;
  j["seed"] = cfg.seed;
  j["config_hash"] = config_hash(cfg);
  write_text(ckpt + "/train_log.json", j.dump(2) + "\n");
  return ckpt;
}

std::string table_to_csv(const ResultsTable& t) {
  std::string out = "row,inception_mean,inception_std,mse_raw,ssim_spectrogram";
  if (t.has_accuracy_column) out += ",accuracy";
  out += "\n";
  for (const auto& r : t.rows) {
    out += r.name;
    out += ",";
    out += r.inception ? fmt(r.inception->mean) : "";
    out += ",";
    out += r.inception ? fmt(r.inception->stddev) : "";
    out += ",";
    out += r.mse_raw ? fmt(*r.mse_raw) : "";
    out += ",";
    out += r.ssim ? fmt(*r.ssim) : "";
    if (t.has_accuracy_column) {
      out += ",";
      out += r.accuracy ? fmt(*r.accuracy) : "";
    }
    out += "\n";
  }
  return out;
}

namespace {

json table_to_json(const ResultsTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json row;
    row["name"] = r.name;
    if (r.inception) {
      row["inception_mean"] = r.inception->mean;
      row["inception_std"] = r.inception->stddev;
    }
    if (r.mse_raw) row["mse_raw"] = *r.mse_raw;
    if (r.ssim) row["ssim_spectrogram"] = *r.ssim;
    if (r.accuracy) row["accuracy"] = *r.accuracy;
    row["failures"] = r.failures;
    rows.push_back(row);
  }
  return json{{"kind", t.kind}, {"rows", rows}};
}

struct TargetWork {
  audio::AudioClip target;
  int label = -1;  // real targets only
  bool ok[3] = {false, false, false};
  inv::InversionResult res[3];
  std::string error[3];
};

constexpr const char* kMethodNames[3] = {"gradient", "mapper", "hybrid"};

int argmax_label(const std::vector<double>& p) {
  int best = 0;
  for (size_t j = 1; j < p.size(); ++j)
    if (p[j] > p[static_cast<size_t>(best)]) best = static_cast<int>(j);
  return best;
}

}  // namespace

EvalOutcome run_evaluate(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::string gan_path = resolve_ckpt(cfg, "gan");
  const std::string clf_path = resolve_ckpt(cfg, "classifier");
  const std::string map_path = resolve_ckpt(cfg, "mapper");
  require_ckpt(gan_path, "gan");
  require_ckpt(clf_path, "classifier");
  require_ckpt(map_path, "mapper");

  gan::Generator g = gan::Generator::load_checkpoint(gan_path);
  clf::DigitClassifier c = clf::DigitClassifier::load_checkpoint(clf_path);
  inv::InverseMapper m = inv::InverseMapper::load_checkpoint(map_path);
  g.set_trainable(false);
  c.set_trainable(false);
  m.set_trainable(false);

  if (g.config().output_length != cfg.canonical_length)
    throw std::runtime_error("evaluate: generator checkpoint length mismatch");
  if (m.latent_dim() != g.config().latent_dim)
    throw std::runtime_error("evaluate: mapper/generator latent dim mismatch");

  const int64_t n_targets = cfg.num_targets;
  Rng base(cfg.seed);

  // fake targets straight from the generator
  std::vector<TargetWork> fake(static_cast<size_t>(n_targets));
  for (int64_t i = 0; i < n_targets; ++i) {
    Rng tr = base.fork(static_cast<uint64_t>(1000 + i));
    gan::LatentVector z = gan::sample_latent(tr, g.config().latent_dim);
    fake[static_cast<size_t>(i)].target = g.generate(z);
  }

  // real targets: stratified round-robin over the evaluation split
  data::LabeledDataset all = load_real_dataset(cfg);
  auto [train_split, heldout_split] =
      data::split_train_heldout(all, cfg.heldout_fraction, cfg.seed ^ 0x5317ULL);
  const data::LabeledDataset& pool = cfg.eval_use_heldout ? heldout_split : train_split;
  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < pool.items.size(); ++i)
    by_class[pool.items[i].label].push_back(i);
  std::vector<TargetWork> real;
  real.reserve(static_cast<size_t>(n_targets));
  for (size_t round = 0; static_cast<int64_t>(real.size()) < n_targets; ++round) {
    bool any = false;
    for (auto& [label, idx] : by_class) {
      if (round < idx.size() && static_cast<int64_t>(real.size()) < n_targets) {
        TargetWork tw;
        tw.target = pool.items[idx[round]].clip;
        tw.label = label;
        real.push_back(std::move(tw));
        any = true;
      }
    }
    if (!any) break;  // pool exhausted
  }
  if (real.empty()) throw std::runtime_error("evaluate: no real targets available");

  // per-target inversion fan-out
  auto run_methods = [&](TargetWork& tw, uint64_t stream) {
    for (int mi = 0; mi < 3; ++mi) {
      Rng mr = base.fork(stream * 8 + static_cast<uint64_t>(mi));
      try {
        if (mi == 0)
          tw.res[0] = inv::invert_gd(g, tw.target, cfg.gd, mr, cfg.spec);
        else if (mi == 1)
          tw.res[1] = inv::invert_mapper(m, g, tw.target, mr, cfg.spec,
                                         cfg.gd.log_spectrogram);
        else
          tw.res[2] = inv::invert_hybrid(m, g, tw.target, cfg.hybrid, mr, cfg.spec);
        tw.ok[mi] = true;
      } catch (const std::exception& e) {
        tw.error[mi] = e.what();
      }
    }
  };

  std::atomic<int64_t> cursor{0};
  const int64_t total = static_cast<int64_t>(fake.size() + real.size());
  auto worker = [&]() {
    for (;;) {
      const int64_t i = cursor.fetch_add(1);
      if (i >= total) return;
      if (i < static_cast<int64_t>(fake.size()))
        run_methods(fake[static_cast<size_t>(i)], 2000 + static_cast<uint64_t>(i));
      else
        run_methods(real[static_cast<size_t>(i - fake.size())],
                    3000 + static_cast<uint64_t>(i - fake.size()));
    }
  };
  {
    std::vector<std::thread> pool_threads;
    const int nw = std::max(1, cfg.workers);
    for (int w = 0; w < nw; ++w) pool_threads.emplace_back(worker);
    for (auto& th : pool_threads) th.join();
  }

  // artifacts
  const std::string out = cfg.out_dir;
  fs::create_directories(out + "/fake");
  fs::create_directories(out + "/real");
  fs::create_directories(out + "/figures");
  const std::string chash = config_hash(cfg);

  auto dump_targets = [&](std::vector<TargetWork>& works, const std::string& kind) {
    for (size_t i = 0; i < works.size(); ++i) {
      const std::string stem = out + "/" + kind + "/target" + std::to_string(i);
      audio::save_wav(stem + "_target.wav", works[i].target);
      for (int mi = 0; mi < 3; ++mi) {
        if (!works[i].ok[mi]) continue;
        const std::string mstem = stem + "_" + kMethodNames[mi];
        audio::save_wav(mstem + ".wav", works[i].res[mi].reconstruction);
        inv::write_result_sidecar(mstem + ".json", works[i].res[mi], cfg.seed, chash);
      }
      if (static_cast<int>(i) < cfg.figure_count && works[i].ok[0] && works[i].ok[1] &&
          works[i].ok[2]) {
        write_comparison_figure(
            out + "/figures/" + kind + std::to_string(i) + ".pgm",
            {works[i].target, works[i].res[0].reconstruction,
             works[i].res[1].reconstruction, works[i].res[2].reconstruction},
            cfg.spec);
      }
    }
  };
  dump_targets(fake, "fake");
  dump_targets(real, "real");

  // aggregation
  std::vector<std::string> diagnostics;
  auto aggregate = [&](std::vector<TargetWork>& works, bool with_labels) {
    ResultsTable t;
    t.kind = with_labels ? "real" : "fake";
    t.has_accuracy_column = with_labels;

    MethodRow source;
    source.name = with_labels ? "Real" : "Fake";
    {
      std::vector<audio::AudioClip> clips;
      for (auto& w : works) clips.push_back(w.target);
      const int splits =
          std::max(1, std::min<int>(cfg.inception_splits, static_cast<int>(clips.size())));
      source.inception = clf::inception_score(c, clips, splits, cfg.spec);
      if (with_labels) {
        std::vector<std::pair<audio::AudioClip, int>> labeled;
        for (auto& w : works) labeled.emplace_back(w.target, w.label);
        source.accuracy = clf::accuracy(c, labeled, cfg.spec);
      }
    }
    t.rows.push_back(source);

    const char* row_names[3] = {"Gradient-based", "Inverse Mapping Model", "Hybrid"};
    for (int mi = 0; mi < 3; ++mi) {
      MethodRow row;
      row.name = row_names[mi];
      std::vector<audio::AudioClip> recons;
      double mse_sum = 0.0, ssim_sum = 0.0;
      int64_t n_ok = 0, correct = 0;
      for (auto& w : works) {
        if (!w.ok[mi]) {
          ++row.failures;
          continue;
        }
        const auto& rec = w.res[mi].reconstruction;
        recons.push_back(rec);
        mse_sum += audio::mse_raw(w.target, rec);
        ssim_sum += audio::ssim(audio::spectrogram(w.target, cfg.spec),
                                audio::spectrogram(rec, cfg.spec));
        if (with_labels) {
          const auto p = c.classify(audio::spectrogram(rec, cfg.spec));
          if (argmax_label(p) == w.label) ++correct;
        }
        ++n_ok;
      }
      if (n_ok > 0) {
        const int splits = std::max(
            1, std::min<int>(cfg.inception_splits, static_cast<int>(recons.size())));
        row.inception = clf::inception_score(c, recons, splits, cfg.spec);
        row.mse_raw = mse_sum / static_cast<double>(n_ok);
        row.ssim = ssim_sum / static_cast<double>(n_ok);
        if (with_labels)
          row.accuracy = static_cast<double>(correct) / static_cast<double>(n_ok);
      }
      if (row.failures > 0)
        diagnostics.push_back(t.kind + "/" + kMethodNames[mi] + ": " +
                              std::to_string(row.failures) + " failed targets");
      t.rows.push_back(row);
    }
    return t;
  };

  EvalOutcome outcome;
  outcome.fake_table = aggregate(fake, false);
  outcome.real_table = aggregate(real, true);
  outcome.out_dir = out;

  // trend diagnostics mirroring the reference ordering on real audio
  {
    const auto& rows = outcome.real_table.rows;
    const double chance = 2.0 / static_cast<double>(c.num_classes());
    const auto& mapper_row = rows[2];
    const auto& grad_row = rows[1];
    if (mapper_row.accuracy && *mapper_row.accuracy <= chance)
      diagnostics.push_back(
          "real/mapper: reconstruction accuracy " + fmt(*mapper_row.accuracy) +
          " does not beat chance threshold " + fmt(chance));
    if (mapper_row.accuracy && grad_row.accuracy &&
        *mapper_row.accuracy <= *grad_row.accuracy)
      diagnostics.push_back("real/mapper: accuracy " + fmt(*mapper_row.accuracy) +
                            " does not exceed gradient-based " +
                            fmt(*grad_row.accuracy));
  }
  outcome.diagnostics = diagnostics;

  write_text(out + "/fake_table.csv", table_to_csv(outcome.fake_table));
  write_text(out + "/real_table.csv", table_to_csv(outcome.real_table));

  json results;
  results["config"] = json::parse(config_to_json(cfg));
  results["config_hash"] = chash;
  results["seed"] = cfg.seed;
  results["checkpoints"] = {
      {"gan", {{"path", gan_path}, {"fingerprint", nn::params_fingerprint(g.params())}}},
      {"classifier",
       {{"path", clf_path}, {"fingerprint", nn::params_fingerprint(c.params())}}},
      {"mapper",
       {{"path", map_path}, {"fingerprint", nn::params_fingerprint(m.params())}}}};
  results["fake_table"] = table_to_json(outcome.fake_table);
  results["real_table"] = table_to_json(outcome.real_table);
  results["diagnostics"] = diagnostics;
  results["num_fake_targets"] = fake.size();
  results["num_real_targets"] = real.size();
  write_text(out + "/results.json", results.dump(2) + "\n");

  return outcome;
}

void run_single_inversion(const ExperimentConfig& cfg, const std::string& wav_path,
                          const std::string& method, const std::string& out_dir) {
  const std::string gan_path = resolve_ckpt(cfg, "gan");
  require_ckpt(gan_path, "gan");
  gan::Generator g = gan::Generator::load_checkpoint(gan_path);
  g.set_trainable(false);

  audio::AudioClip target = audio::load_wav(wav_path, cfg.canonical_length);
  Rng rng(cfg.seed);
  inv::InversionResult res;
  if (method == "gradient") {
    res = inv::invert_gd(g, target, cfg.gd, rng, cfg.spec);
  } else {
    const std::string map_path = resolve_ckpt(cfg, "mapper");
    require_ckpt(map_path, "mapper");
    inv::InverseMapper m = inv::InverseMapper::load_checkpoint(map_path);
    m.set_trainable(false);
    if (method == "mapper")
      res = inv::invert_mapper(m, g, target, rng, cfg.spec, cfg.gd.log_spectrogram);
    else if (method == "hybrid")
      res = inv::invert_hybrid(m, g, target, cfg.hybrid, rng, cfg.spec);
    else
      throw std::invalid_argument("unknown method: " + method +
                                  " (expected gradient|mapper|hybrid)");
  }

  fs::create_directories(out_dir);
  const fs::path stem = fs::path(out_dir) / fs::path(wav_path).stem();
  audio::save_wav(stem.string() + "_" + res.method + ".wav", res.reconstruction);
  inv::write_result_sidecar(stem.string() + "_" + res.method + ".json", res, cfg.seed,
                            config_hash(cfg));
  write_comparison_figure(stem.string() + "_" + res.method + ".pgm",
                          {target, res.reconstruction}, cfg.spec);
  std::cout << "method=" << res.method << " final_loss=" << res.final_loss
            << " steps_used=" << res.steps_used << " wall_time=" << res.wall_time_sec
            << "s\n";
}

}  // namespace audioinv::exp
