#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dgtta/checkpoint.hpp"
#include "dgtta/gin.hpp"
#include "dgtta/losses.hpp"
#include "dgtta/ssc.hpp"

namespace dgtta {

struct PretrainConfig {
  Pipeline pipeline = Pipeline::Plain;
  Normalization normalization = Normalization::Volume;
  int epochs = 20;
  int batch_size = 2;
  int patches_per_volume = 2;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  LossWeights loss_weights;
  double foreground_fraction = 0.33;  ///< share of patches centred on a labelled voxel
  Shape3 patch_size{64, 64, 64};
  bool normalize_before_gin = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PretrainLog {
  std::vector<double> epoch_loss;
  std::size_t iterations = 0;
};

/// Mean and std over every voxel of every image (for dataset normalization).
std::pair<double, double> intensity_statistics(const Dataset& ds);

/// Produces training patches. Each call re-draws GIN networks and patch origins.
class PatchSampler {
 public:
  PatchSampler(const Dataset& ds, const PretrainConfig& cfg, const GinConfig& gin, const InputPipeline& input);

  /// Network input and labels for one patch of sample `index`.
  std::pair<Volume, LabelMap> draw(std::size_t index, std::mt19937_64& rng) const;

 private:
  const Dataset& ds_;
  PretrainConfig cfg_;
  GinConfig gin_;
  InputPipeline input_;
  std::vector<Volume> ready_;  // inputs cached when no per-draw augmentation applies
  std::vector<std::vector<std::size_t>> foreground_;
};

/// Supervised training of `model` on the labelled source dataset. The returned
/// checkpoint records everything inference needs to rebuild the input pipeline.
Checkpoint pretrain(SegModel model, const Dataset& ds, const PretrainConfig& cfg, const GinConfig& gin,
                    const SscConfig& ssc, PretrainLog* log = nullptr);

}  // namespace dgtta
