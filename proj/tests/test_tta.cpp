#include <gtest/gtest.h>

#include <cmath>

#include "dgtta/error.hpp"
#include "dgtta/tta.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dgtta;

namespace {

SegModelConfig small(NormKind norm = NormKind::Batch, int classes = 3) {
  SegModelConfig c;
  c.in_channels = 1;
  c.num_classes = classes;
  c.base_width = 4;
  c.depth = 2;
  c.norm = norm;
  c.seed = 9;
  return c;
}

Checkpoint checkpoint(const SegModelConfig& c, Shape3 patch = {8, 8, 8}) {
  ModelManifest m;
  m.model = c;
  m.patch_size = patch;
  return Checkpoint(m);
}

// Target with some structure so the model output is not constant.
Volume target_volume(Shape3 n = {16, 16, 16}) {
  Volume v(1, n, {1.5, 1.5, 1.5});
  for (std::size_t z = 0; z < n[0]; ++z)
    for (std::size_t y = 0; y < n[1]; ++y)
      for (std::size_t x = 0; x < n[2]; ++x) {
        const double r = std::hypot(z - 8.0, y - 7.0, x - 9.0);
        v.at(0, z, y, x) = static_cast<float>(r < 5 ? 1.0 : 0.1 * std::sin(0.7 * x));
      }
  return v;
}

// Constant-output model: every weight zero, head bias sets the logits.
void make_constant(SegModel& m, const std::vector<float>& logits) {
  for (auto* p : m.parameters()) std::fill(p->value.begin(), p->value.end(), 0.0f);
  for (auto* p : m.parameters())
    if (p->name == "head.bias") p->value.assign(logits.begin(), logits.end());
}

AdaptationConfig quick(int steps = 2, int patches = 2) {
  AdaptationConfig c;
  c.num_steps = steps;
  c.patches_per_step = patches;
  c.ensemble_size = 1;
  c.seed = 3;
  c.spatial.max_translation_vox = 1.0;  // 8^3 patches: keep the two views overlapping
  return c;
}

}  // namespace

TEST(AdaptationConfig, DefaultsAndValidation) {
  const AdaptationConfig d;
  EXPECT_DOUBLE_EQ(d.learning_rate, 1e-5);
  EXPECT_DOUBLE_EQ(d.weight_decay, 0.01);
  EXPECT_EQ(d.num_steps, 12);
  EXPECT_EQ(d.patches_per_step, 16);
  EXPECT_EQ(d.loss_exponent, 2);
  EXPECT_EQ(d.ensemble_size, 3);
  EXPECT_EQ(d.param_group, ParamGroup::All);
  EXPECT_EQ(d.resolved_classes(4), (std::vector<int>{1, 2, 3}));

  auto bad = d;
  bad.learning_rate = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = d;
  bad.loss_exponent = 3;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = d;
  bad.patches_per_step = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = d;
  bad.ensemble_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = d;
  bad.class_subset = {4};
  EXPECT_THROW(bad.resolved_classes(4), ConfigError);
  bad.class_subset = {1, 1};
  EXPECT_THROW(bad.resolved_classes(4), ConfigError);
}

TEST(Adapt, ZeroStepsReturnsModelBitExactly) {
  SegModel m(small());
  auto cfg = quick(0);
  auto r = adapt(m, target_volume(), {8, 8, 8}, cfg);
  EXPECT_TRUE(same_weights(r.model, m));
  EXPECT_TRUE(r.loss_trace.empty());
  EXPECT_EQ(r.optimizer_steps, 0);
}

TEST(Adapt, IdentityTransformsOnlyWeightDecayDrift) {
  for (NormKind norm : {NormKind::Batch, NormKind::Instance}) {
    SegModel m(small(norm));
    auto cfg = quick(3, 2);
    cfg.spatial.max_rotation_deg = cfg.spatial.max_scale_delta = cfg.spatial.max_translation_vox = 0.0;
    const auto r = adapt(m, target_volume(), {8, 8, 8}, cfg);
    ASSERT_EQ(r.loss_trace.size(), 3u);
    EXPECT_LT(r.loss_trace[0], 1e-6);
    SegModel adapted = r.model;
    const auto before = m.parameters(), after = adapted.parameters();
    const double decay = std::pow(1.0 - cfg.learning_rate * cfg.weight_decay, cfg.num_steps);
    for (std::size_t k = 0; k < before.size(); ++k)
      for (std::size_t i = 0; i < before[k]->size(); ++i) {
        const double expected = before[k]->value[i] * decay;
        EXPECT_LE(std::fabs(after[k]->value[i] - expected), 1e-6 * std::max(1e-3, std::fabs(expected)))
            << before[k]->name;
      }
  }
}

TEST(Adapt, SeededTracesAreDeterministicAndStepsCounted) {
  SegModel m(small());
  const auto cfg = quick(3, 4);
  const auto a = adapt(m, target_volume(), {8, 8, 8}, cfg);
  const auto b = adapt(m, target_volume(), {8, 8, 8}, cfg);
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  EXPECT_EQ(a.optimizer_steps, 3);
  EXPECT_EQ(a.patches_per_step, (std::vector<int>{4, 4, 4}));
  for (double l : a.loss_trace) {
    EXPECT_GE(l, 0.0);
    EXPECT_LT(l, 1.0 + 1e-6);
  }
  SegModel x = a.model, y = b.model;
  EXPECT_TRUE(same_weights(x, y));
  EXPECT_FALSE(same_weights(x, m));
}

TEST(Adapt, OnlySelectedGroupMoves) {
  SegModel m(small());
  auto cfg = quick(2, 2);
  cfg.learning_rate = 1e-3;
  cfg.param_group = ParamGroup::Norm;
  auto r = adapt(m, target_volume(), {8, 8, 8}, cfg);
  const auto before = m.parameters(), after = r.model.parameters();
  bool norm_moved = false;
  for (std::size_t k = 0; k < before.size(); ++k) {
    if (before[k]->is_norm) {
      norm_moved = norm_moved || before[k]->value != after[k]->value;
    } else {
      EXPECT_EQ(before[k]->value, after[k]->value) << before[k]->name;
    }
  }
  EXPECT_TRUE(norm_moved);
}

TEST(Adapt, EmptyGroupAndChannelMismatch) {
  auto c = small(NormKind::Instance);
  c.norm_affine = false;
  SegModel m(c);
  auto cfg = quick();
  cfg.param_group = ParamGroup::Norm;
  EXPECT_THROW(adapt(m, target_volume(), {8, 8, 8}, cfg), ConfigError);
  EXPECT_THROW(adapt(SegModel(small()), Volume(2, {16, 16, 16}, {1, 1, 1}), {8, 8, 8}, quick()), InvalidArgument);
  EXPECT_THROW(adapt(SegModel(small()), Volume(1, {4, 16, 16}, {1, 1, 1}), {8, 8, 8}, quick()), InvalidArgument);
}

TEST(Adapt, AllOutOfFieldPatchesNameTheStep) {
  SegModel m(small());
  auto cfg = quick(2, 3);
  cfg.spatial.max_translation_vox = 1e5;
  try {
    adapt(m, target_volume(), {8, 8, 8}, cfg);
    FAIL() << "expected a degenerate-input error";
  } catch (const DegenerateInput& e) {
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
  }
}

TEST(AdaptEnsemble, MembersUseConsecutiveSeeds) {
  Checkpoint base = checkpoint(small());
  auto cfg = quick(2, 2);
  cfg.ensemble_size = 3;
  const auto members = adapt_ensemble(base, target_volume(), cfg, 2);
  ASSERT_EQ(members.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    auto single = cfg;
    single.seed = cfg.seed + i;
    const auto r = adapt(base.model, base.manifest.input.prepare(target_volume()), {8, 8, 8}, single);
    EXPECT_EQ(members[i].loss_trace, r.loss_trace);
  }
  EXPECT_NE(members[0].loss_trace, members[1].loss_trace);
}

TEST(Tent, UniformPredictionStartsAtLogK) {
  SegModel m(small(NormKind::Batch, 4));
  make_constant(m, {0, 0, 0, 0});
  for (auto* p : m.parameters(ParamGroup::Norm))
    if (p->name.find("gamma") != std::string::npos) std::fill(p->value.begin(), p->value.end(), 1.0f);
  TentConfig cfg;
  cfg.steps = 1;
  const auto r = tent_adapt(m, target_volume(), {8, 8, 8}, cfg);
  EXPECT_NEAR(r.entropy_trace.at(0), std::log(4.0), 1e-5);
}

TEST(Tent, ConfidentModelBarelyMoves) {
  SegModel m(small());
  make_constant(m, {60, 0, 0});
  const auto r = tent_adapt(m, target_volume(), {8, 8, 8}, TentConfig{});
  for (double h : r.entropy_trace) EXPECT_LT(h, 1e-6);
  SegModel adapted = r.model;
  const auto a = m.parameters(), b = adapted.parameters();
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k]->size(); ++i) EXPECT_NEAR(a[k]->value[i], b[k]->value[i], 1e-6);
}

TEST(Tent, EntropyTraceNonIncreasingOnFixedInput) {
  SegModel m(small());
  TentConfig cfg;
  cfg.steps = 10;
  cfg.learning_rate = 1e-3;
  const Volume v = target_volume({8, 8, 8});  // patch == volume: input fixed
  const auto r = tent_adapt(m, v, {8, 8, 8}, cfg);
  ASSERT_EQ(r.entropy_trace.size(), 10u);
  for (std::size_t i = 1; i < 10; ++i) EXPECT_LE(r.entropy_trace[i], r.entropy_trace[i - 1] + 1e-3);
  EXPECT_LT(r.entropy_trace.back(), r.entropy_trace.front());
}

TEST(Tent, NeedsNormParameters) {
  auto c = small();
  c.norm_affine = false;
  EXPECT_THROW(tent_adapt(SegModel(c), target_volume(), {8, 8, 8}, TentConfig{}), ConfigError);
}

TEST(Ensemble, SingleAndIdenticalMembersMatchArgmax) {
  Checkpoint a = checkpoint(small(NormKind::Instance));
  const Volume v = target_volume();
  const PatchSpec spec = inference_spec(a.manifest);
  EXPECT_EQ(spec.stride, (Shape3{4, 4, 4}));
  const LabelMap direct = argmax(sliding_window_predict(a.model, a.manifest.input.prepare(v), spec));
  const LabelMap one = ensemble_predict({&a}, v, spec);
  Checkpoint b = a, c = a;
  const LabelMap three = ensemble_predict({&a, &b, &c}, v, spec);
  EXPECT_TRUE(std::equal(one.labels().begin(), one.labels().end(), direct.labels().begin()));
  EXPECT_TRUE(std::equal(three.labels().begin(), three.labels().end(), direct.labels().begin()));
}

TEST(Ensemble, TwoModelToyAveragesProbabilities) {
  Checkpoint a = checkpoint(small(NormKind::Instance, 2)), b = checkpoint(small(NormKind::Instance, 2));
  make_constant(a.model, {2.0f, 0.0f});
  make_constant(b.model, {0.0f, 3.0f});
  // softmax: a = (0.881, 0.119), b = (0.047, 0.953); mean = (0.464, 0.536).
  const double pa1 = 1.0 / (1.0 + std::exp(2.0)), pb1 = 1.0 / (1.0 + std::exp(-3.0));
  const Volume v = target_volume();
  const Volume probs = ensemble_probabilities({&a, &b}, v, inference_spec(a.manifest));
  for (float f : probs.channel(1)) EXPECT_NEAR(f, 0.5 * (pa1 + pb1), 1e-5);
  const LabelMap both = ensemble_predict({&a, &b}, v, inference_spec(a.manifest));
  for (auto l : both.labels()) EXPECT_EQ(l, 1);
  const LabelMap first = ensemble_predict({&a}, v, inference_spec(a.manifest));
  for (auto l : first.labels()) EXPECT_EQ(l, 0);
}

TEST(Ensemble, HeterogeneousManifestsRejected) {
  Checkpoint a = checkpoint(small(NormKind::Instance, 2)), b = checkpoint(small(NormKind::Instance, 3));
  EXPECT_THROW(ensemble_predict({&a, &b}, target_volume(), inference_spec(a.manifest)), ConfigError);
  Checkpoint c = checkpoint(small(NormKind::Instance, 2));
  c.manifest.input.normalization = Normalization::Dataset;
  EXPECT_THROW(ensemble_predict({&a, &c}, target_volume(), inference_spec(a.manifest)), ConfigError);
  EXPECT_THROW(ensemble_predict({}, target_volume(), inference_spec(a.manifest)), InvalidArgument);
}
