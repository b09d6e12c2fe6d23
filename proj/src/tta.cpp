#include "dgtta/tta.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "dgtta/error.hpp"
#include "dgtta/losses.hpp"
#include "dgtta/nn/adamw.hpp"

namespace dgtta {

void AdaptationConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("tta learning_rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("tta weight_decay must be >= 0");
  if (num_steps < 0) throw ConfigError("tta num_steps must be >= 0");
  if (patches_per_step < 1) throw ConfigError("tta patches_per_step must be >= 1");
  if (loss_exponent != 1 && loss_exponent != 2) throw ConfigError("tta loss_exponent must be 1 or 2");
  if (!(stability_eps > 0.0)) throw ConfigError("tta stability_eps must be positive");
  if (ensemble_size < 1) throw ConfigError("tta ensemble_size must be >= 1");
  if (foreground_oversampling < 0.0) throw ConfigError("tta foreground_oversampling must be >= 0");
  spatial.validate();
}

std::vector<int> AdaptationConfig::resolved_classes(int num_classes) const {
  std::vector<int> out = class_subset;
  if (out.empty()) {
    for (int c = 1; c < num_classes; ++c) out.push_back(c);
  }
  for (int c : out) {
    if (c < 0 || c >= num_classes) {
      throw ConfigError("class " + std::to_string(c) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) throw ConfigError("class subset lists a class twice");
  if (out.empty()) throw ConfigError("class subset is empty");
  return out;
}

namespace {

Eigen::Matrix4d translation(const Shape3& origin) {
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  for (int a = 0; a < 3; ++a) t(a, 3) = static_cast<double>(origin[a]);
  return t;
}

void check_patch(const Volume& target, const Shape3& patch) {
  for (int a = 0; a < 3; ++a) {
    if (target.shape()[a] < patch[a]) throw InvalidArgument("target volume is smaller than the patch size");
  }
}

// Origins are uniform over valid positions, except that a share
// k / (k + 1) of them is centred on a voxel the unadapted model calls foreground.
class OriginSampler {
 public:
  OriginSampler(SegModel& model, const Volume& target, const Shape3& patch, double oversampling)
      : shape_(target.shape()), patch_(patch), oversampling_(oversampling) {
    if (oversampling_ <= 0.0) return;
    const LabelMap proxy = argmax(sliding_window_predict(model, target, {patch, patch}));
    const auto lab = proxy.labels();
    for (std::size_t i = 0; i < lab.size(); ++i) {
      if (lab[i] > 0) foreground_.push_back(i);
    }
  }

  Shape3 draw(std::mt19937_64& rng) const {
    Shape3 origin{};
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool fg = unit(rng) < oversampling_ / (oversampling_ + 1.0);
    if (fg && !foreground_.empty()) {
      const std::size_t v = foreground_[std::uniform_int_distribution<std::size_t>(0, foreground_.size() - 1)(rng)];
      const Shape3 centre{v / (shape_[1] * shape_[2]), (v / shape_[2]) % shape_[1], v % shape_[2]};
      for (int a = 0; a < 3; ++a) {
        const long o = static_cast<long>(centre[a]) - static_cast<long>(patch_[a] / 2);
        origin[a] = static_cast<std::size_t>(std::clamp(o, 0L, static_cast<long>(shape_[a] - patch_[a])));
      }
    } else {
      for (int a = 0; a < 3; ++a) origin[a] = std::uniform_int_distribution<std::size_t>(0, shape_[a] - patch_[a])(rng);
    }
    return origin;
  }

 private:
  Shape3 shape_, patch_;
  double oversampling_;
  std::vector<std::size_t> foreground_;
};

// One augmented branch: how its input is sampled from the target and how its
// prediction is brought back to the patch frame.
struct Branch {
  SamplingPlan input;
  SamplingPlan back;
};

Branch make_branch(const AffineAugmentation& t, const Shape3& target_shape, const Shape3& origin, const Shape3& patch) {
  t.check_invertible();
  Branch b;
  b.input = SamplingPlan::build(target_shape, patch, translation(origin) * t.matrix.inverse());
  std::vector<std::uint8_t> valid(b.input.validity.size());
  for (std::size_t i = 0; i < valid.size(); ++i) valid[i] = b.input.validity[i] >= t.validity_threshold;
  b.back = SamplingPlan::build(patch, patch, t.matrix, valid);
  return b;
}

}  // namespace

AdaptationResult adapt(SegModel model, const Volume& target, const Shape3& patch_size, const AdaptationConfig& cfg) {
  cfg.validate();
  const int num_classes = model.config().num_classes;
  const auto classes = cfg.resolved_classes(num_classes);
  if (static_cast<int>(target.channels()) != model.config().in_channels) {
    throw InvalidArgument("target has " + std::to_string(target.channels()) + " channels, the model expects " +
                          std::to_string(model.config().in_channels));
  }
  check_patch(target, patch_size);
  AdaptationResult result{std::move(model), {}, {}, 0};
  if (cfg.num_steps == 0) return result;
  SegModel& m = result.model;

  auto params = parameter_subset(m, cfg.param_group);
  if (params.empty()) throw ConfigError("parameter group '" + nn::to_string(cfg.param_group) + "' is empty");
  nn::AdamW<float> opt(params, cfg.learning_rate, cfg.weight_decay);
  std::mt19937_64 rng(cfg.seed);
  const OriginSampler origins(m, target, patch_size, cfg.foreground_oversampling);
  const std::size_t nc = target.channels(), nk = static_cast<std::size_t>(num_classes);
  const std::size_t nv = voxel_count(patch_size);
  const float inv_np = 1.0f / static_cast<float>(cfg.patches_per_step);

  for (int step = 0; step < cfg.num_steps; ++step) {
    m.zero_grad();
    double loss_sum = 0.0;
    int used = 0;
    for (int k = 0; k < cfg.patches_per_step; ++k) {
      const Shape3 origin = origins.draw(rng);
      const auto ta = sample_affine(cfg.spatial, patch_size, rng);
      const auto tb = sample_affine(cfg.spatial, patch_size, rng);
      const Branch ba = make_branch(ta, target.shape(), origin, patch_size);
      const Branch bb = make_branch(tb, target.shape(), origin, patch_size);

      nn::Tensor<float> x(2, nc, patch_size);
      for (std::size_t c = 0; c < nc; ++c) {
        ba.input.apply(target.channel(c), {x.channel(0, c), nv}, 0.0f);
        bb.input.apply(target.channel(c), {x.channel(1, c), nv}, 0.0f);
      }
      const auto probs = m.forward(x, Phase::Training);

      nn::Tensor<float> ya(1, nk, patch_size), yb(1, nk, patch_size);
      for (std::size_t c = 0; c < nk; ++c) {
        ba.back.apply({probs.channel(0, c), nv}, {ya.channel(0, c), nv}, 0.0f);
        bb.back.apply({probs.channel(1, c), nv}, {yb.channel(0, c), nv}, 0.0f);
      }
      std::vector<std::uint8_t> mask(nv);
      std::size_t active = 0;
      for (std::size_t i = 0; i < nv; ++i) {
        mask[i] = ba.back.validity[i] >= ta.validity_threshold && bb.back.validity[i] >= tb.validity_threshold;
        active += mask[i];
      }
      if (active == 0) continue;
      nn::Tensor<float> ga, gb;
      const double loss = consistency_dice_loss(ya, yb, mask, classes, cfg.loss_exponent, cfg.stability_eps, &ga, &gb);
      if (!std::isfinite(loss)) throw NumericalError("tta step " + std::to_string(step + 1) + ": non-finite loss");
      for (auto& g : ga.data) g *= inv_np;
      for (auto& g : gb.data) g *= inv_np;
      nn::Tensor<float> grad(2, nk, patch_size);
      for (std::size_t c = 0; c < nk; ++c) {
        ba.back.apply_adjoint({ga.channel(0, c), nv}, {grad.channel(0, c), nv});
        bb.back.apply_adjoint({gb.channel(0, c), nv}, {grad.channel(1, c), nv});
      }
      m.backward(grad);
      loss_sum += loss;
      ++used;
    }
    if (used == 0) {
      throw DegenerateInput("tta step " + std::to_string(step + 1) +
                            ": every patch had an empty consistency mask");
    }
    // Gradients were scaled by 1 / N_p; rescale when patches were skipped.
    if (used != cfg.patches_per_step) {
      const float fix = static_cast<float>(cfg.patches_per_step) / static_cast<float>(used);
      for (auto* p : params)
        for (auto& g : p->grad) g *= fix;
    }
    opt.step();
    ++result.optimizer_steps;
    result.patches_per_step.push_back(used);
    result.loss_trace.push_back(loss_sum / used);
    spdlog::debug("tta step {}/{} loss {:.6f}", step + 1, cfg.num_steps, result.loss_trace.back());
  }
  return result;
}

std::vector<AdaptationResult> adapt_ensemble(const Checkpoint& base, const Volume& raw_target,
                                             const AdaptationConfig& cfg, int workers) {
  cfg.validate();
  const Volume target = base.manifest.input.prepare(raw_target);
  const auto n = static_cast<std::size_t>(cfg.ensemble_size);
  std::vector<std::optional<AdaptationResult>> slots(n);
  auto run = [&](std::size_t i) {
    AdaptationConfig member = cfg;
    member.seed = cfg.seed + i;
    slots[i] = adapt(base.model, target, base.manifest.patch_size, member);
  };
  const std::size_t nw = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, n);
  if (nw == 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::vector<std::exception_ptr> errors(nw);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < nw; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += nw) run(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<AdaptationResult> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

void TentConfig::validate() const {
  if (steps < 0) throw ConfigError("tent steps must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("tent learning_rate must be positive");
  if (patches_per_step < 1) throw ConfigError("tent patches_per_step must be >= 1");
}

TentResult tent_adapt(SegModel model, const Volume& target, const Shape3& patch_size, const TentConfig& cfg) {
  cfg.validate();
  check_patch(target, patch_size);
  if (model.config().norm != NormKind::Batch) {
    spdlog::warn("tent: model uses instance normalization; adapting its affine parameters anyway");
  }
  TentResult result{std::move(model), {}};
  SegModel& m = result.model;
  auto params = m.parameters(ParamGroup::Norm);
  if (params.empty()) throw ConfigError("tent needs normalization affine parameters; the model has none");
  nn::AdamW<float> opt(params, cfg.learning_rate, 0.0);
  std::mt19937_64 rng(cfg.seed);
  const std::size_t nc = target.channels();
  for (int step = 0; step < cfg.steps; ++step) {
    m.zero_grad();
    nn::Tensor<float> x(static_cast<std::size_t>(cfg.patches_per_step), nc, patch_size);
    for (std::size_t k = 0; k < x.batch; ++k) {
      Shape3 origin{};
      for (int a = 0; a < 3; ++a) {
        origin[a] = std::uniform_int_distribution<std::size_t>(0, target.shape()[a] - patch_size[a])(rng);
      }
      const Volume patch = crop(target, origin, patch_size);
      std::copy(patch.data().begin(), patch.data().end(), x.sample(k));
    }
    const auto probs = m.forward(x, Phase::Training);
    nn::Tensor<float> grad;
    const double h = mean_entropy(probs, &grad);
    if (!std::isfinite(h)) throw NumericalError("tent step " + std::to_string(step + 1) + ": non-finite entropy");
    m.backward(grad);
    opt.step();
    result.entropy_trace.push_back(h);
  }
  return result;
}

PatchSpec inference_spec(const ModelManifest& m) {
  PatchSpec spec;
  spec.patch_size = m.patch_size;
  for (int a = 0; a < 3; ++a) spec.stride[a] = std::max<std::size_t>(1, m.patch_size[a] / 2);
  return spec;
}

Volume ensemble_probabilities(std::vector<Checkpoint*> models, const Volume& raw, const PatchSpec& spec) {
  if (models.empty()) throw InvalidArgument("ensemble is empty");
  for (std::size_t i = 1; i < models.size(); ++i) require_compatible(models[0]->manifest, models[i]->manifest);
  const Volume input = models[0]->manifest.input.prepare(raw);
  Volume acc;
  for (auto* ck : models) {
    Volume p = sliding_window_predict(ck->model, input, spec);
    if (acc.size() == 0) {
      acc = std::move(p);
    } else {
      auto a = acc.data();
      const auto b = p.data();
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    }
  }
  const float inv = 1.0f / static_cast<float>(models.size());
  for (auto& v : acc.data()) v *= inv;
  return acc;
}

LabelMap ensemble_predict(std::vector<Checkpoint*> models, const Volume& raw, const PatchSpec& spec) {
  return argmax(ensemble_probabilities(std::move(models), raw, spec));
}

}  // namespace dgtta
