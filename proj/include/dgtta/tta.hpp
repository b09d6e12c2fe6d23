#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgtta/checkpoint.hpp"
#include "dgtta/segnet.hpp"
#include "dgtta/spatial.hpp"

namespace dgtta {

struct AdaptationConfig {
  double learning_rate = 1e-5;
  double weight_decay = 0.01;
  int num_steps = 12;
  int patches_per_step = 16;
  int loss_exponent = 2;
  double stability_eps = 1e-8;
  std::vector<int> class_subset;  ///< empty selects every foreground class
  ParamGroup param_group = ParamGroup::All;
  int ensemble_size = 3;
  double foreground_oversampling = 2.0;  ///< odds of a foreground-centred patch vs a uniform one
  SpatialConfig spatial;
  std::uint64_t seed = 0;

  /// Checks ranges; num_steps = 0 is allowed and leaves the model untouched.
  void validate() const;
  /// class_subset with the empty default expanded, validated against `num_classes`.
  std::vector<int> resolved_classes(int num_classes) const;
};

struct AdaptationResult {
  SegModel model;
  std::vector<double> loss_trace;           ///< mean patch loss per step
  std::vector<int> patches_per_step;        ///< patches that contributed gradient, per step
  int optimizer_steps = 0;
};

/// Consistency-based adaptation on one prepared target volume (channels already
/// matching the model). Each step accumulates gradients over
/// cfg.patches_per_step patches, normalized by that count, then takes one AdamW
/// step on the selected parameter group.
AdaptationResult adapt(SegModel model, const Volume& target, const Shape3& patch_size, const AdaptationConfig& cfg);

/// Adapts `cfg.ensemble_size` copies of `base` on a raw target volume with
/// seeds cfg.seed, cfg.seed + 1, ... Members run on up to `workers` threads.
std::vector<AdaptationResult> adapt_ensemble(const Checkpoint& base, const Volume& raw_target,
                                             const AdaptationConfig& cfg, int workers = 1);

struct TentConfig {
  int steps = 10;
  double learning_rate = 1e-3;
  int patches_per_step = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TentResult {
  SegModel model;
  std::vector<double> entropy_trace;  ///< mean entropy of the step's patches before its update
};

/// Entropy minimisation over the normalization affine parameters only, with
/// batch statistics taken from the current patches.
TentResult tent_adapt(SegModel model, const Volume& target, const Shape3& patch_size, const TentConfig& cfg);

/// Mean class probabilities of several models on a raw volume; each model's
/// manifest decides its input preprocessing.
Volume ensemble_probabilities(std::vector<Checkpoint*> models, const Volume& raw, const PatchSpec& spec);
LabelMap ensemble_predict(std::vector<Checkpoint*> models, const Volume& raw, const PatchSpec& spec);

/// Default sliding-window spec for a checkpoint: its patch size, half-patch stride.
PatchSpec inference_spec(const ModelManifest& m);

}  // namespace dgtta
