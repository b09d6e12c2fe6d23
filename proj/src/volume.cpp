#include "dgtta/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dgtta/error.hpp"

namespace dgtta {

void validate_spacing(const Spacing& spacing) {
  for (double s : spacing) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw InvalidArgument("spacing components must be strictly positive, got " +
                            std::to_string(s));
    }
  }
}

Volume::Volume(std::size_t channels, Shape3 shape, Spacing spacing, float fill)
    : channels_(channels), shape_(shape), spacing_(spacing),
      data_(channels * voxel_count(shape), fill) {
  validate_spacing(spacing_);
  if (channels_ == 0) throw InvalidArgument("volume needs at least one channel");
}

Volume::Volume(std::size_t channels, Shape3 shape, Spacing spacing, std::vector<float> data)
    : channels_(channels), shape_(shape), spacing_(spacing), data_(std::move(data)) {
  validate_spacing(spacing_);
  if (channels_ == 0) throw InvalidArgument("volume needs at least one channel");
  if (data_.size() != channels_ * voxel_count(shape_)) {
    throw InvalidArgument("volume payload size does not match channels x shape");
  }
}

void Volume::set_spacing(const Spacing& spacing) {
  validate_spacing(spacing);
  spacing_ = spacing;
}

bool Volume::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

LabelMap::LabelMap(Shape3 shape, Spacing spacing, int num_classes, std::int32_t fill)
    : shape_(shape), spacing_(spacing), num_classes_(num_classes),
      labels_(voxel_count(shape), fill) {
  validate_spacing(spacing_);
  if (num_classes_ < 1) throw InvalidArgument("label map needs at least one class");
}

LabelMap::LabelMap(Shape3 shape, Spacing spacing, int num_classes,
                   std::vector<std::int32_t> labels)
    : shape_(shape), spacing_(spacing), num_classes_(num_classes), labels_(std::move(labels)) {
  validate_spacing(spacing_);
  if (num_classes_ < 1) throw InvalidArgument("label map needs at least one class");
  if (labels_.size() != voxel_count(shape_)) {
    throw InvalidArgument("label payload size does not match shape");
  }
}

void LabelMap::validate() const {
  for (auto l : labels_) {
    if (l < 0 || l >= num_classes_) {
      throw InvalidArgument("label value " + std::to_string(l) + " outside [0, " +
                            std::to_string(num_classes_) + ")");
    }
  }
}

bool Dataset::labeled() const {
  return !samples.empty() &&
         std::all_of(samples.begin(), samples.end(), [](const Sample& s) { return s.label.has_value(); });
}

int Dataset::num_classes() const {
  int k = 0;
  for (const auto& s : samples) {
    if (!s.label) continue;
    if (k == 0) {
      k = s.label->num_classes();
    } else if (k != s.label->num_classes()) {
      throw DataError("dataset '" + domain_tag + "' mixes class counts (" + std::to_string(k) +
                      " vs " + std::to_string(s.label->num_classes()) + ")");
    }
  }
  return k;
}

bool same_geometry(const Volume& v, const LabelMap& l) {
  return v.shape() == l.shape() && v.spacing() == l.spacing();
}

namespace {

Shape3 resampled_shape(const Shape3& shape, const Spacing& from, const Spacing& to) {
  Shape3 out{};
  for (int a = 0; a < 3; ++a) {
    const double extent = static_cast<double>(shape[a]) * from[a] / to[a];
    out[a] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(extent + 0.5 + 1e-9)));
  }
  return out;
}

// Source coordinate of output voxel j when the field of view is preserved.
double source_coordinate(std::size_t j, double ratio) {
  return (static_cast<double>(j) + 0.5) * ratio - 0.5;
}

struct LinearTap {
  std::size_t lo, hi;
  double frac;
};

std::vector<LinearTap> linear_taps(std::size_t n_out, std::size_t n_in, double ratio) {
  std::vector<LinearTap> taps(n_out);
  const double max_index = static_cast<double>(n_in - 1);
  for (std::size_t j = 0; j < n_out; ++j) {
    const double s = std::clamp(source_coordinate(j, ratio), 0.0, max_index);
    const double f = std::floor(s);
    const auto lo = static_cast<std::size_t>(f);
    taps[j] = {lo, std::min(lo + 1, n_in - 1), s - f};
  }
  return taps;
}

}  // namespace

Volume resample(const Volume& v, const Spacing& target_spacing) {
  validate_spacing(target_spacing);
  const Shape3 in_shape = v.shape();
  const Shape3 out_shape = resampled_shape(in_shape, v.spacing(), target_spacing);
  std::array<std::vector<LinearTap>, 3> taps;
  for (int a = 0; a < 3; ++a) {
    taps[a] = linear_taps(out_shape[a], in_shape[a], target_spacing[a] / v.spacing()[a]);
  }
  Volume out(v.channels(), out_shape, target_spacing);
  for (std::size_t c = 0; c < v.channels(); ++c) {
    for (std::size_t z = 0; z < out_shape[0]; ++z) {
      const auto& tz = taps[0][z];
      for (std::size_t y = 0; y < out_shape[1]; ++y) {
        const auto& ty = taps[1][y];
        for (std::size_t x = 0; x < out_shape[2]; ++x) {
          const auto& tx = taps[2][x];
          auto plane = [&](std::size_t zz) {
            const double a = (1.0 - tx.frac) * v.at(c, zz, ty.lo, tx.lo) + tx.frac * v.at(c, zz, ty.lo, tx.hi);
            const double b = (1.0 - tx.frac) * v.at(c, zz, ty.hi, tx.lo) + tx.frac * v.at(c, zz, ty.hi, tx.hi);
            return (1.0 - ty.frac) * a + ty.frac * b;
          };
          const double value = (1.0 - tz.frac) * plane(tz.lo) + tz.frac * plane(tz.hi);
          out.at(c, z, y, x) = static_cast<float>(value);
        }
      }
    }
  }
  return out;
}

LabelMap resample_labels(const LabelMap& l, const Spacing& target_spacing) {
  validate_spacing(target_spacing);
  const Shape3 in_shape = l.shape();
  const Shape3 out_shape = resampled_shape(in_shape, l.spacing(), target_spacing);
  std::array<std::vector<std::size_t>, 3> nearest;
  for (int a = 0; a < 3; ++a) {
    const double ratio = target_spacing[a] / l.spacing()[a];
    nearest[a].resize(out_shape[a]);
    for (std::size_t j = 0; j < out_shape[a]; ++j) {
      const double s = std::floor(source_coordinate(j, ratio) + 0.5);
      nearest[a][j] = static_cast<std::size_t>(
          std::clamp(s, 0.0, static_cast<double>(in_shape[a] - 1)));
    }
  }
  LabelMap out(out_shape, target_spacing, l.num_classes());
  for (std::size_t z = 0; z < out_shape[0]; ++z)
    for (std::size_t y = 0; y < out_shape[1]; ++y)
      for (std::size_t x = 0; x < out_shape[2]; ++x)
        out.at(z, y, x) = l.at(nearest[0][z], nearest[1][y], nearest[2][x]);
  return out;
}

Volume znormalize(const Volume& v) {
  const auto data = v.data();
  double mean = 0.0;
  for (float f : data) mean += f;
  mean /= static_cast<double>(data.size());
  double var = 0.0;
  for (float f : data) var += (f - mean) * (f - mean);
  var /= static_cast<double>(data.size());
  const double sd = std::sqrt(var);
  Volume out = v;
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) {
    od[i] = static_cast<float>(sd > 0.0 ? (data[i] - mean) / sd : 0.0);
  }
  return out;
}

Volume crop(const Volume& v, const Shape3& origin, const Shape3& extent) {
  for (int a = 0; a < 3; ++a) {
    if (origin[a] + extent[a] > v.shape()[a]) throw InvalidArgument("crop exceeds volume bounds");
  }
  Volume out(v.channels(), extent, v.spacing());
  for (std::size_t c = 0; c < v.channels(); ++c)
    for (std::size_t z = 0; z < extent[0]; ++z)
      for (std::size_t y = 0; y < extent[1]; ++y) {
        const float* src = &v.data()[v.index(c, origin[0] + z, origin[1] + y, origin[2])];
        std::copy(src, src + extent[2], &out.at(c, z, y, 0));
      }
  return out;
}

LabelMap crop(const LabelMap& l, const Shape3& origin, const Shape3& extent) {
  for (int a = 0; a < 3; ++a) {
    if (origin[a] + extent[a] > l.shape()[a]) throw InvalidArgument("crop exceeds label bounds");
  }
  LabelMap out(extent, l.spacing(), l.num_classes());
  for (std::size_t z = 0; z < extent[0]; ++z)
    for (std::size_t y = 0; y < extent[1]; ++y)
      for (std::size_t x = 0; x < extent[2]; ++x)
        out.at(z, y, x) = l.at(origin[0] + z, origin[1] + y, origin[2] + x);
  return out;
}

}  // namespace dgtta
