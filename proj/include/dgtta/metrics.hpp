#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dgtta/volume.hpp"

namespace dgtta {

/// 2|P n R| / (|P| + |R|) for one class; 1.0 when the class is absent from both.
double dice_score(const LabelMap& pred, const LabelMap& ref, int class_id);

enum class HausdorffVariant {
  Pooled,       ///< 95th percentile of both directed distance sets taken together
  MaxDirected,  ///< larger of the two directed 95th percentiles
};

/// Value in mm, or empty with a reason when a mask is empty.
struct SurfaceDistance {
  std::optional<double> value;
  std::string reason;

  bool defined() const { return value.has_value(); }
};

SurfaceDistance hd95(const LabelMap& pred, const LabelMap& ref, int class_id, const Spacing& spacing,
                     HausdorffVariant variant = HausdorffVariant::Pooled);

using VoxelIndex = std::array<int, 3>;

/// Voxels of the mask with at least one 6-neighbour outside it (grid borders
/// count as outside).
std::vector<VoxelIndex> surface_voxels(const LabelMap& l, int class_id);

/// Squared physical distance, accumulated as (dz sz)^2 + (dy sy)^2 + (dx sx)^2.
inline double squared_distance(const VoxelIndex& a, const VoxelIndex& b, const Spacing& s) {
  const double dz = static_cast<double>(a[0] - b[0]) * s[0];
  const double dy = static_cast<double>(a[1] - b[1]) * s[1];
  const double dx = static_cast<double>(a[2] - b[2]) * s[2];
  return dz * dz + dy * dy + dx * dx;
}

/// For each query the distance to the nearest target voxel (exact k-d tree search).
std::vector<double> nearest_distances(const std::vector<VoxelIndex>& queries, const std::vector<VoxelIndex>& targets,
                                      const Spacing& spacing);

/// Percentile q in [0, 100] by linear interpolation between order statistics
/// at position q / 100 * (n - 1).
double percentile(std::vector<double> values, double q);

}  // namespace dgtta
