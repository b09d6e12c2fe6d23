#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dgtta/nn/segmodel.hpp"
#include "dgtta/volume.hpp"

namespace dgtta {

using SegModel = nn::SegModel<float>;
using nn::NormKind;
using nn::ParamGroup;
using nn::Phase;
using nn::SegModelConfig;

struct PatchSpec {
  Shape3 patch_size{64, 64, 64};
  Shape3 stride{32, 32, 32};

  /// stride must be in [1, patch_size] per axis.
  void validate() const;
};

/// Single-sample tensor view of a volume (copy).
nn::Tensor<float> to_tensor(const Volume& v);
Volume to_volume(const nn::Tensor<float>& t, std::size_t sample, const Spacing& spacing);

/// Window origins along one axis: 0, stride, 2 * stride, ... plus the last
/// origin flush with the far edge.
std::vector<std::size_t> window_origins(std::size_t extent, std::size_t patch, std::size_t stride);

using PatchPredictor = std::function<Volume(const Volume&)>;

/// Tiles `v` with overlapping windows, predicts each with `predict` and
/// averages overlapping outputs with uniform weights.
Volume sliding_window_predict(const PatchPredictor& predict, const Volume& v, const PatchSpec& spec,
                              std::size_t out_channels);

/// Full-volume class probabilities using inference-mode normalization.
Volume sliding_window_predict(SegModel& model, const Volume& v, const PatchSpec& spec);

/// Parameter handles for one of "norm", "encoder", "decoder", "all". Unknown
/// names raise InvalidArgument; an empty norm group logs a warning.
std::vector<nn::Parameter<float>*> parameter_subset(SegModel& model, const std::string& group);
std::vector<nn::Parameter<float>*> parameter_subset(SegModel& model, ParamGroup group);

/// Per-voxel argmax over channels; ties resolve to the lowest class index.
LabelMap argmax(const Volume& probs);

}  // namespace dgtta
