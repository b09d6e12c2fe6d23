#include "dgtta/pretrain.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dgtta/config.hpp"
#include "dgtta/error.hpp"
#include "dgtta/nn/adamw.hpp"

namespace dgtta {

void PretrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patches_per_volume < 1) throw ConfigError("patches_per_volume must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (foreground_fraction < 0.0 || foreground_fraction > 1.0) throw ConfigError("foreground_fraction must lie in [0, 1]");
  for (auto p : patch_size) {
    if (p == 0) throw ConfigError("patch_size must be positive");
  }
  loss_weights.validate();
}

std::pair<double, double> intensity_statistics(const Dataset& ds) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& s : ds.samples) {
    for (float v : s.image.data()) {
      sum += v;
      sq += static_cast<double>(v) * v;
    }
    n += s.image.size();
  }
  if (n == 0) throw DataError("dataset holds no voxels");
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
  return {mean, var > 0.0 ? std::sqrt(var) : 1.0};
}

PatchSampler::PatchSampler(const Dataset& ds, const PretrainConfig& cfg, const GinConfig& gin,
                           const InputPipeline& input)
    : ds_(ds), cfg_(cfg), gin_(gin), input_(input) {
  for (const auto& s : ds_.samples) {
    if (!s.label) throw DataError("sample '" + s.id + "' has no label map");
    if (!same_geometry(s.image, *s.label)) throw DataError("sample '" + s.id + "': image and label geometry differ");
    for (int a = 0; a < 3; ++a) {
      if (s.image.shape()[a] < cfg_.patch_size[a]) {
        throw DataError("sample '" + s.id + "' is smaller than the training patch");
      }
    }
    std::vector<std::size_t> fg;
    const auto lab = s.label->labels();
    for (std::size_t i = 0; i < lab.size(); ++i) {
      if (lab[i] > 0) fg.push_back(i);
    }
    foreground_.push_back(std::move(fg));
    if (!uses_gin(input_.pipeline)) ready_.push_back(input_.prepare(s.image));
  }
}

std::pair<Volume, LabelMap> PatchSampler::draw(std::size_t index, std::mt19937_64& rng) const {
  const Sample& s = ds_.samples.at(index);
  const Shape3& shape = s.image.shape();
  const Shape3& p = cfg_.patch_size;
  Shape3 origin{};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& fg = foreground_[index];
  if (!fg.empty() && unit(rng) < cfg_.foreground_fraction) {
    const std::size_t v = fg[std::uniform_int_distribution<std::size_t>(0, fg.size() - 1)(rng)];
    const Shape3 centre{v / (shape[1] * shape[2]), (v / shape[2]) % shape[1], v % shape[2]};
    for (int a = 0; a < 3; ++a) {
      const long o = static_cast<long>(centre[a]) - static_cast<long>(p[a] / 2);
      origin[a] = static_cast<std::size_t>(std::clamp(o, 0L, static_cast<long>(shape[a] - p[a])));
    }
  } else {
    for (int a = 0; a < 3; ++a) origin[a] = std::uniform_int_distribution<std::size_t>(0, shape[a] - p[a])(rng);
  }
  LabelMap label = crop(*s.label, origin, p);
  if (!uses_gin(input_.pipeline)) return {crop(ready_[index], origin, p), std::move(label)};
  // GIN is drawn afresh on every call, on the full volume, then cropped.
  Volume x = cfg_.normalize_before_gin ? input_.normalize(s.image) : s.image;
  x = gin_augment(x, gin_, rng);
  if (!cfg_.normalize_before_gin) x = input_.normalize(x);
  return {crop(input_.describe(x), origin, p), std::move(label)};
}

Checkpoint pretrain(SegModel model, const Dataset& ds, const PretrainConfig& cfg, const GinConfig& gin,
                    const SscConfig& ssc, PretrainLog* log) {
  cfg.validate();
  gin.validate();
  ssc.validate();
  ModelManifest manifest;
  manifest.model = model.config();
  manifest.input.pipeline = cfg.pipeline;
  manifest.input.normalization = cfg.normalization;
  manifest.input.ssc = ssc;
  manifest.patch_size = cfg.patch_size;
  manifest.pretrain_seed = cfg.seed;
  manifest.source_domain = ds.domain_tag;
  {
    KeyValueDocument snapshot;
    write_section(snapshot, cfg);
    write_section(snapshot, gin);
    write_section(snapshot, ssc);
    manifest.pretrain_config_hash = sha256_hex(snapshot.str());
  }
  manifest.validate();
  if (ds.samples.empty()) throw DataError("training dataset is empty");
  if (!ds.labeled()) throw DataError("training dataset must be fully labelled");
  if (ds.num_classes() > model.config().num_classes) {
    throw ConfigError("labels use " + std::to_string(ds.num_classes()) + " classes but the model predicts " +
                      std::to_string(model.config().num_classes));
  }
  if (cfg.normalization == Normalization::Dataset) {
    std::tie(manifest.input.dataset_mean, manifest.input.dataset_std) = intensity_statistics(ds);
  }
  Checkpoint ckpt(manifest, std::move(model));
  if (log) *log = {};
  if (cfg.epochs == 0) return ckpt;

  PatchSampler sampler(ds, cfg, gin, manifest.input);
  std::mt19937_64 rng(cfg.seed);
  auto params = ckpt.model.parameters();
  nn::AdamW<float> opt(params, cfg.learning_rate, cfg.weight_decay);
  const std::size_t per_epoch = ds.samples.size() * static_cast<std::size_t>(cfg.patches_per_volume);
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t channels = static_cast<std::size_t>(manifest.model.in_channels);
  std::vector<std::size_t> order(per_epoch);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < per_epoch; start += bs) {
      const std::size_t n = std::min(bs, per_epoch - start);
      nn::Tensor<float> x(n, channels, cfg.patch_size);
      std::vector<std::int32_t> target(n * voxel_count(cfg.patch_size));
      for (std::size_t k = 0; k < n; ++k) {
        auto [img, lab] = sampler.draw(order[start + k] / static_cast<std::size_t>(cfg.patches_per_volume), rng);
        std::copy(img.data().begin(), img.data().end(), x.sample(k));
        std::copy(lab.labels().begin(), lab.labels().end(), target.begin() + static_cast<long>(k * lab.voxels()));
      }
      opt.zero_grad();
      const auto probs = ckpt.model.forward(x, Phase::Training);
      nn::Tensor<float> grad;
      const double loss = supervised_loss(probs, target, cfg.loss_weights, &grad);
      if (!std::isfinite(loss)) {
        throw NumericalError("pretrain: non-finite loss in epoch " + std::to_string(epoch + 1));
      }
      ckpt.model.backward(grad);
      opt.step();
      loss_sum += loss;
      ++batches;
      if (log) ++log->iterations;
    }
    const double mean = loss_sum / static_cast<double>(batches);
    if (log) log->epoch_loss.push_back(mean);
    spdlog::info("pretrain[{}] epoch {}/{} loss {:.4f}", to_string(cfg.pipeline), epoch + 1, cfg.epochs, mean);
  }
  return ckpt;
}

}  // namespace dgtta
