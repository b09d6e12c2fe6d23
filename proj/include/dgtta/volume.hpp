#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dgtta {

/// Spatial extent in canonical (z, y, x) order.
using Shape3 = std::array<std::size_t, 3>;

/// Voxel size in mm, canonical (z, y, x) order.
using Spacing = std::array<double, 3>;

inline std::size_t voxel_count(const Shape3& s) { return s[0] * s[1] * s[2]; }

void validate_spacing(const Spacing& spacing);

/// Dense channel-first 3D float volume. Layout is (channel, z, y, x), x fastest.
class Volume {
 public:
  Volume() = default;
  Volume(std::size_t channels, Shape3 shape, Spacing spacing, float fill = 0.0f);
  Volume(std::size_t channels, Shape3 shape, Spacing spacing, std::vector<float> data);

  std::size_t channels() const { return channels_; }
  const Shape3& shape() const { return shape_; }
  const Spacing& spacing() const { return spacing_; }
  std::size_t voxels() const { return voxel_count(shape_); }
  std::size_t size() const { return data_.size(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& storage() { return data_; }

  std::span<float> channel(std::size_t c) { return {data_.data() + c * voxels(), voxels()}; }
  std::span<const float> channel(std::size_t c) const {
    return {data_.data() + c * voxels(), voxels()};
  }

  std::size_t index(std::size_t c, std::size_t z, std::size_t y, std::size_t x) const {
    return ((c * shape_[0] + z) * shape_[1] + y) * shape_[2] + x;
  }
  float& at(std::size_t c, std::size_t z, std::size_t y, std::size_t x) {
    return data_[index(c, z, y, x)];
  }
  float at(std::size_t c, std::size_t z, std::size_t y, std::size_t x) const {
    return data_[index(c, z, y, x)];
  }

  void set_spacing(const Spacing& spacing);

  bool all_finite() const;

 private:
  std::size_t channels_ = 0;
  Shape3 shape_{0, 0, 0};
  Spacing spacing_{1.0, 1.0, 1.0};
  std::vector<float> data_;
};

/// Integer class-per-voxel grid.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(Shape3 shape, Spacing spacing, int num_classes, std::int32_t fill = 0);
  LabelMap(Shape3 shape, Spacing spacing, int num_classes, std::vector<std::int32_t> labels);

  const Shape3& shape() const { return shape_; }
  const Spacing& spacing() const { return spacing_; }
  int num_classes() const { return num_classes_; }
  std::size_t voxels() const { return voxel_count(shape_); }

  std::span<std::int32_t> labels() { return labels_; }
  std::span<const std::int32_t> labels() const { return labels_; }

  std::size_t index(std::size_t z, std::size_t y, std::size_t x) const {
    return (z * shape_[1] + y) * shape_[2] + x;
  }
  std::int32_t& at(std::size_t z, std::size_t y, std::size_t x) { return labels_[index(z, y, x)]; }
  std::int32_t at(std::size_t z, std::size_t y, std::size_t x) const {
    return labels_[index(z, y, x)];
  }

  /// Throws InvalidArgument when a voxel is outside [0, num_classes).
  void validate() const;

 private:
  Shape3 shape_{0, 0, 0};
  Spacing spacing_{1.0, 1.0, 1.0};
  int num_classes_ = 0;
  std::vector<std::int32_t> labels_;
};

struct Sample {
  std::string id;
  Volume image;
  std::optional<LabelMap> label;
};

struct Dataset {
  std::string domain_tag;
  std::vector<Sample> samples;

  bool labeled() const;
  /// Shared class count of the labeled samples; throws DataError on disagreement.
  int num_classes() const;
};

bool same_geometry(const Volume& v, const LabelMap& l);

/// Trilinear resampling to a new voxel size. Field of view is preserved; extents
/// are round-half-up of n * old / new. Samples beyond the grid clamp to the edge.
Volume resample(const Volume& v, const Spacing& target_spacing);

/// Nearest-neighbour companion to resample() for label maps.
LabelMap resample_labels(const LabelMap& l, const Spacing& target_spacing);

/// Per-volume z-score normalization over all voxels of every channel. A constant
/// volume maps to zeros.
Volume znormalize(const Volume& v);

/// Copies the axis-aligned block starting at `origin` with extent `extent`.
Volume crop(const Volume& v, const Shape3& origin, const Shape3& extent);
LabelMap crop(const LabelMap& l, const Shape3& origin, const Shape3& extent);

}  // namespace dgtta
