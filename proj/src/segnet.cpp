#include "dgtta/segnet.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

#include "dgtta/error.hpp"

namespace dgtta {

namespace nn {

template class SegModel<float>;
template class SegModel<double>;

ParamGroup parse_param_group(const std::string& name) {
  if (name == "norm") return ParamGroup::Norm;
  if (name == "encoder") return ParamGroup::Encoder;
  if (name == "decoder") return ParamGroup::Decoder;
  if (name == "all") return ParamGroup::All;
  throw InvalidArgument("unknown parameter group '" + name + "' (expected norm, encoder, decoder or all)");
}

std::string to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::Norm: return "norm";
    case ParamGroup::Encoder: return "encoder";
    case ParamGroup::Decoder: return "decoder";
    case ParamGroup::All: return "all";
  }
  return "all";
}

NormKind parse_norm_kind(const std::string& name) {
  if (name == "instance") return NormKind::Instance;
  if (name == "batch") return NormKind::Batch;
  throw InvalidArgument("unknown norm kind '" + name + "' (expected instance or batch)");
}

std::string to_string(NormKind k) { return k == NormKind::Batch ? "batch" : "instance"; }

void SegModelConfig::validate() const {
  if (in_channels < 1) throw InvalidArgument("in_channels must be >= 1");
  if (num_classes < 2) throw InvalidArgument("num_classes must be >= 2");
  if (base_width < 1) throw InvalidArgument("base_width must be >= 1");
  if (depth < 1 || depth > 6) throw InvalidArgument("depth must be in [1, 6]");
  if (max_width < base_width) throw InvalidArgument("max_width must be >= base_width");
}

int SegModelConfig::width(int stage) const { return std::min(max_width, base_width << stage); }

}  // namespace nn

void PatchSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (patch_size[a] == 0) throw InvalidArgument("patch size must be positive");
    if (stride[a] == 0 || stride[a] > patch_size[a]) throw InvalidArgument("stride must lie in [1, patch size]");
  }
}

nn::Tensor<float> to_tensor(const Volume& v) {
  nn::Tensor<float> t(1, v.channels(), v.shape());
  std::copy(v.data().begin(), v.data().end(), t.data.begin());
  return t;
}

Volume to_volume(const nn::Tensor<float>& t, std::size_t sample, const Spacing& spacing) {
  std::vector<float> data(t.sample(sample), t.sample(sample) + t.sample_size());
  return Volume(t.channels, t.shape, spacing, std::move(data));
}

std::vector<std::size_t> window_origins(std::size_t extent, std::size_t patch, std::size_t stride) {
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o + patch <= extent; o += stride) out.push_back(o);
  if (out.empty() || out.back() + patch < extent) out.push_back(extent - patch);
  return out;
}

Volume sliding_window_predict(const PatchPredictor& predict, const Volume& v, const PatchSpec& spec,
                              std::size_t out_channels) {
  spec.validate();
  for (int a = 0; a < 3; ++a) {
    if (v.shape()[a] < spec.patch_size[a]) {
      throw InvalidArgument("volume extent " + std::to_string(v.shape()[a]) + " is smaller than the patch size " +
                            std::to_string(spec.patch_size[a]));
    }
  }
  std::array<std::vector<std::size_t>, 3> origins;
  for (int a = 0; a < 3; ++a) origins[a] = window_origins(v.shape()[a], spec.patch_size[a], spec.stride[a]);
  Volume acc(out_channels, v.shape(), v.spacing(), 0.0f);
  std::vector<float> hits(v.voxels(), 0.0f);
  const Shape3& p = spec.patch_size;
  for (auto oz : origins[0])
    for (auto oy : origins[1])
      for (auto ox : origins[2]) {
        const Volume out = predict(crop(v, {oz, oy, ox}, p));
        if (out.channels() != out_channels || out.shape() != p) {
          throw InvalidArgument("patch predictor returned an unexpected layout");
        }
        for (std::size_t z = 0; z < p[0]; ++z)
          for (std::size_t y = 0; y < p[1]; ++y)
            for (std::size_t x = 0; x < p[2]; ++x) {
              for (std::size_t c = 0; c < out_channels; ++c) acc.at(c, oz + z, oy + y, ox + x) += out.at(c, z, y, x);
              hits[acc.index(0, oz + z, oy + y, ox + x)] += 1.0f;
            }
      }
  for (std::size_t c = 0; c < out_channels; ++c) {
    auto ch = acc.channel(c);
    for (std::size_t i = 0; i < ch.size(); ++i) ch[i] /= hits[i];
  }
  return acc;
}

Volume sliding_window_predict(SegModel& model, const Volume& v, const PatchSpec& spec) {
  if (static_cast<int>(v.channels()) != model.config().in_channels) {
    throw InvalidArgument("model expects " + std::to_string(model.config().in_channels) +
                          " input channels, got " + std::to_string(v.channels()));
  }
  auto predictor = [&](const Volume& patch) {
    return to_volume(model.forward(to_tensor(patch), Phase::Inference), 0, patch.spacing());
  };
  return sliding_window_predict(predictor, v, spec, static_cast<std::size_t>(model.config().num_classes));
}

std::vector<nn::Parameter<float>*> parameter_subset(SegModel& model, ParamGroup group) {
  auto params = model.parameters(group);
  if (group == ParamGroup::Norm && params.empty()) {
    spdlog::warn("parameter group 'norm' is empty: the model has no affine normalization parameters");
  }
  return params;
}

std::vector<nn::Parameter<float>*> parameter_subset(SegModel& model, const std::string& group) {
  return parameter_subset(model, nn::parse_param_group(group));
}

LabelMap argmax(const Volume& probs) {
  LabelMap out(probs.shape(), probs.spacing(), static_cast<int>(probs.channels()));
  auto labels = out.labels();
  for (std::size_t i = 0; i < probs.voxels(); ++i) {
    std::int32_t best = 0;
    float best_p = probs.channel(0)[i];
    for (std::size_t c = 1; c < probs.channels(); ++c) {
      if (probs.channel(c)[i] > best_p) {
        best_p = probs.channel(c)[i];
        best = static_cast<std::int32_t>(c);
      }
    }
    labels[i] = best;
  }
  return out;
}

}  // namespace dgtta
