#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "dgtta/volume.hpp"

namespace dgtta {

inline constexpr float kDefaultSentinel = -1.0e6f;

struct SpatialConfig {
  double max_rotation_deg = 10.0;
  double max_scale_delta = 0.1;
  double max_translation_vox = 5.0;
  double validity_threshold = 0.999;
  float sentinel = kDefaultSentinel;

  void validate() const;
};

/// Invertible affine transform in homogeneous (z, y, x, 1) voxel coordinates.
/// The matrix maps source positions to warped positions: warp() reads the
/// source at M^-1 p and inverse_warp() at M p.
struct AffineAugmentation {
  Eigen::Matrix4d matrix = Eigen::Matrix4d::Identity();
  float sentinel = kDefaultSentinel;
  double validity_threshold = 0.999;

  /// Throws InvalidArgument when |det| <= 1e-8.
  void check_invertible() const;
  AffineAugmentation inverse() const;
};

/// Rotation about each axis, per-axis scaling and translation, composed about
/// the centre of a grid of shape `grid`.
AffineAugmentation sample_affine(const SpatialConfig& cfg, const Shape3& grid, std::mt19937_64& rng);

/// Trilinear sampling plan. Each output voxel keeps up to 8 source taps; taps
/// that fall outside the source grid (or on source voxels flagged invalid) are
/// dropped, and `validity` holds the total weight of the remaining ones.
struct SamplingPlan {
  Shape3 source_shape{};
  Shape3 output_shape{};
  std::vector<std::array<std::int32_t, 8>> index;
  std::vector<std::array<float, 8>> weight;  // already divided by validity
  std::vector<float> validity;

  /// `source_to_sample` maps output voxel coordinates to source coordinates.
  /// `source_valid`, when non-empty, flags source voxels usable as taps.
  static SamplingPlan build(const Shape3& source_shape, const Shape3& output_shape,
                            const Eigen::Matrix4d& output_to_source,
                            std::span<const std::uint8_t> source_valid = {});

  /// Resamples one channel; voxels with zero validity receive `fill`.
  void apply(std::span<const float> src, std::span<float> dst, float fill) const;
  /// Adjoint of apply(): scatters output gradients back onto source voxels.
  void apply_adjoint(std::span<const float> grad_out, std::span<float> grad_src) const;
  /// Carries a per-voxel validity field through the plan (unnormalised).
  std::vector<float> transport(std::span<const float> field) const;
};

/// Trilinear resampling through t. Voxels whose validity drops below
/// t.validity_threshold are set to t.sentinel; sentinel-valued input voxels
/// are treated as outside the field.
Volume warp(const Volume& v, const AffineAugmentation& t);
Volume inverse_warp(const Volume& v, const AffineAugmentation& t);

/// Boolean voxel grid.
struct Mask {
  Shape3 shape{};
  std::vector<std::uint8_t> data;

  std::size_t count() const;
};

/// True where neither a nor b carries the sentinel in any channel.
Mask consistency_mask(const Volume& a, const Volume& b, float sentinel);

}  // namespace dgtta
