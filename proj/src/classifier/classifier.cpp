#include "classifier/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace audioinv::clf {

using json = nlohmann::json;

ResNetBody::ResNetBody(nn::ParamSet& ps, const ResNetConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  stem_ = nn::Conv2d(ps, "stem", 1, cfg.width, 3, 1, 1, rng);
  for (int64_t s = 0; s < 4; ++s) {
    const int64_t in_ch = s == 0 ? cfg.width : cfg.width << (s - 1);
    const int64_t out_ch = cfg.width << s;
    std::vector<Block> blocks;
    for (int64_t b = 0; b < cfg.blocks_per_stage; ++b) {
      Block blk;
      const std::string name = "s" + std::to_string(s) + "b" + std::to_string(b);
      const int64_t bin = b == 0 ? in_ch : out_ch;
      const int stride = b == 0 ? 2 : 1;
      blk.conv1 = nn::Conv2d(ps, name + ".c1", bin, out_ch, 3, stride, 1, rng);
      blk.conv2 = nn::Conv2d(ps, name + ".c2", out_ch, out_ch, 3, 1, 1, rng);
      blk.has_proj = (bin != out_ch) || stride != 1;
      if (blk.has_proj)
        blk.proj = nn::Conv2d(ps, name + ".proj", bin, out_ch, 1, stride, 0, rng);
      blk.res_scale = ps.add(name + ".scale", Tensor::full({1}, 0.5f));
      blocks.push_back(std::move(blk));
    }
    stages_.push_back(std::move(blocks));
  }
}

ag::Var ResNetBody::run_block(const Block& blk, const ag::Var& x) const {
  ag::Var h = ag::relu(blk.conv1.forward(x));
  h = blk.conv2.forward(h);
  h = ag::mul(h, ag::broadcast_scalar(blk.res_scale, h->value.shape()));
  ag::Var skip = blk.has_proj ? blk.proj.forward(x) : x;
  return ag::relu(ag::add(skip, h));
}

std::vector<ag::Var> ResNetBody::stage_taps(const ag::Var& x) const {
  if (x->value.ndim() != 4 || x->value.dim(1) != 1 || x->value.dim(2) != cfg_.in_h ||
      x->value.dim(3) != cfg_.in_w)
    throw std::invalid_argument("resnet: expects [B,1," + std::to_string(cfg_.in_h) +
                                "," + std::to_string(cfg_.in_w) + "], got " +
                                x->value.shape_str());
  ag::Var h = ag::mul_scalar(ag::add_scalar(x, cfg_.input_shift), cfg_.input_scale);
  h = ag::relu(stem_.forward(h));
  std::vector<ag::Var> taps;
  taps.reserve(stages_.size());
  for (const auto& blocks : stages_) {
    for (const auto& blk : blocks) h = run_block(blk, h);
    taps.push_back(h);
  }
  return taps;
}

ag::Var ResNetBody::forward(const ag::Var& x) const {
  return ag::global_avg_pool2d(stage_taps(x).back());
}

DigitClassifier::DigitClassifier(ResNetConfig cfg, int64_t num_classes,
                                 uint64_t init_seed)
    : num_classes_(num_classes) {
  if (num_classes < 2)
    throw std::invalid_argument("classifier: need at least 2 classes");
  Rng rng(init_seed ^ 0xc1a551f1e5ULL);
  body_ = ResNetBody(params_, cfg, rng);
  head_ = nn::Linear(params_, "fc", body_.out_channels(), num_classes, rng);
}

ag::Var DigitClassifier::forward_logits(const ag::Var& x) const {
  return head_.forward(body_.forward(x));
}

Tensor DigitClassifier::spec_to_input(const audio::Spectrogram& s) {
  const int64_t bins = s.bins(), frames = s.frames();
  Tensor x({1, 1, frames, bins});
  for (int64_t f = 0; f < frames; ++f)
    for (int64_t k = 0; k < bins; ++k) x[f * bins + k] = s.values.at(k, f);
  return x;
}

std::vector<double> DigitClassifier::classify(const audio::Spectrogram& s) const {
  ag::NoGradGuard ng;
  ag::Var logits = forward_logits(ag::constant(spec_to_input(s)));
  const float* row = logits->value.data();
  float mx = row[0];
  for (int64_t j = 1; j < num_classes_; ++j) mx = std::max(mx, row[j]);
  std::vector<double> p(static_cast<size_t>(num_classes_));
  double z = 0.0;
  for (int64_t j = 0; j < num_classes_; ++j) {
    p[static_cast<size_t>(j)] = std::exp(static_cast<double>(row[j] - mx));
    z += p[static_cast<size_t>(j)];
  }
  for (auto& v : p) v /= z;
  return p;
}

std::vector<ag::Var> DigitClassifier::features_var(const ag::Var& x) const {
  return body_.stage_taps(x);
}

std::vector<Tensor> DigitClassifier::features(const audio::Spectrogram& s) const {
  ag::NoGradGuard ng;
  auto taps = body_.stage_taps(ag::constant(spec_to_input(s)));
  std::vector<Tensor> out;
  out.reserve(taps.size());
  for (auto& t : taps) out.push_back(t->value);
  return out;
}

void DigitClassifier::save_checkpoint(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  nn::save_params(params_, dir + "/params.bin");
  const auto& cfg = body_.config();
  json m;
  m["type"] = "classifier";
  m["num_classes"] = num_classes_;
  m["width"] = cfg.width;
  m["blocks_per_stage"] = cfg.blocks_per_stage;
  m["in_h"] = cfg.in_h;
  m["in_w"] = cfg.in_w;
  m["input_shift"] = cfg.input_shift;
  m["input_scale"] = cfg.input_scale;
  m["feature_taps"] = {"stage0", "stage1", "stage2", "stage3"};
  m["params_fingerprint"] = nn::params_fingerprint(params_);
  std::ofstream os(dir + "/manifest.json");
  os << m.dump(2) << "\n";
  if (!os) throw std::runtime_error("classifier: cannot write manifest in " + dir);
}

DigitClassifier DigitClassifier::load_checkpoint(const std::string& dir) {
  std::ifstream is(dir + "/manifest.json");
  if (!is) throw std::runtime_error("classifier: missing manifest in " + dir);
  json m = json::parse(is);
  if (m.value("type", "") != "classifier")
    throw std::runtime_error("classifier: manifest type mismatch in " + dir);
  ResNetConfig cfg;
  cfg.width = m.at("width").get<int64_t>();
  cfg.blocks_per_stage = m.at("blocks_per_stage").get<int64_t>();
  cfg.in_h = m.at("in_h").get<int64_t>();
  cfg.in_w = m.at("in_w").get<int64_t>();
  cfg.input_shift = m.at("input_shift").get<float>();
  cfg.input_scale = m.at("input_scale").get<float>();
  DigitClassifier c(cfg, m.at("num_classes").get<int64_t>(), 0);
  nn::load_params(c.params_, dir + "/params.bin");
  return c;
}

ClassifierTrainReport train_classifier(DigitClassifier& c,
                                       const std::vector<LabeledSpecExample>& data,
                                       const ClassifierTrainConfig& cfg, Rng& rng) {
  if (data.empty()) throw std::invalid_argument("train_classifier: empty dataset");
  std::vector<bool> class_seen(static_cast<size_t>(c.num_classes()), false);
  for (const auto& ex : data) {
    if (ex.label < 0 || ex.label >= c.num_classes())
      throw std::invalid_argument("train_classifier: label out of range");
    class_seen[static_cast<size_t>(ex.label)] = true;
  }
  int64_t seen = std::count(class_seen.begin(), class_seen.end(), true);
  if (seen < 2)
    throw std::invalid_argument("train_classifier: need at least 2 classes present");

  // deterministic held-out split
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(cfg.split_seed);
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[split_rng.next_below(i)]);
  const size_t heldout_n =
      std::max<size_t>(1, static_cast<size_t>(cfg.heldout_fraction * data.size()));
  std::vector<size_t> heldout(order.begin(), order.begin() + heldout_n);
  std::vector<size_t> train(order.begin() + heldout_n, order.end());
  if (train.empty()) train = heldout;

  const int64_t f = data[0].input.dim(1);
  const int64_t bins = data[0].input.dim(2);

  nn::AdamConfig ac;
  ac.lr = cfg.lr;
  nn::Adam opt(c.params().vars(), ac);

  ClassifierTrainReport report;
  report.loss_trace.reserve(static_cast<size_t>(cfg.steps));
  for (int64_t step = 0; step < cfg.steps; ++step) {
    const int64_t bs = std::min<int64_t>(cfg.batch_size,
                                         static_cast<int64_t>(train.size()));
    Tensor x({bs, 1, f, bins});
    std::vector<int> labels(static_cast<size_t>(bs));
    for (int64_t b = 0; b < bs; ++b) {
      const auto& ex = data[train[rng.next_below(train.size())]];
      std::copy(ex.input.data(), ex.input.data() + ex.input.numel(),
                x.data() + b * f * bins);
      labels[static_cast<size_t>(b)] = ex.label;
    }
    ag::Var logits = c.forward_logits(ag::constant(std::move(x)));
    ag::Var loss = ag::softmax_cross_entropy(logits, labels);
    const float lv = loss->value[0];
    if (!std::isfinite(lv))
      throw std::runtime_error("train_classifier: non-finite loss at step " +
                               std::to_string(step));
    report.loss_trace.push_back(lv);
    ag::backward(loss);
    opt.step();
  }

  // held-out accuracy
  ag::NoGradGuard ng;
  int64_t correct = 0;
  for (size_t idx : heldout) {
    Tensor x({1, 1, f, bins});
    std::copy(data[idx].input.data(), data[idx].input.data() + f * bins, x.data());
    ag::Var logits = c.forward_logits(ag::constant(std::move(x)));
    int64_t argmax = 0;
    for (int64_t j = 1; j < c.num_classes(); ++j)
      if (logits->value[j] > logits->value[argmax]) argmax = j;
    if (argmax == data[idx].label) ++correct;
  }
  report.heldout_count = static_cast<int64_t>(heldout.size());
  report.heldout_accuracy =
      static_cast<double>(correct) / static_cast<double>(heldout.size());
  return report;
}

}  // namespace audioinv::clf
