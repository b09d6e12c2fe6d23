#pragma once

#include <array>

#include "dgtta/volume.hpp"

namespace dgtta {

/// Self-similarity context descriptor settings.
struct SscConfig {
  int patch_size = 1;       ///< edge length of the compared patches, voxels
  int patch_distance = 1;   ///< offset of the six neighbour patches from the centre, voxels
  double low_factor = 0.001;   ///< variance clamp, relative to the image-wide mean
  double high_factor = 1000.0;
  double stability_eps = 1e-12;
  bool normalize_input = true;  ///< z-score the input before computing distances

  void validate() const;
  bool operator==(const SscConfig&) const = default;
};

using VoxelOffset = std::array<int, 3>;  // (dz, dy, dx)

struct OffsetPair {
  VoxelOffset first;
  VoxelOffset second;
};

inline constexpr std::size_t kSscChannels = 12;

/// The 12 pairs of 6-neighbourhood offsets that sit diagonally to each other,
/// i.e. |a - b|^2 = 2 d^2. Each unordered pair appears once with first < second
/// lexicographically, and the table is sorted lexicographically. Channel k of
/// the descriptor belongs to entry k.
std::array<OffsetPair, kSscChannels> diagonal_pair_table(int patch_distance = 1);

/// Maps a single-channel volume to the 12-channel SSC descriptor. Channel k holds
/// exp(-SSD_k / sigma2) where SSD_k is the patch distance of pair k and sigma2 is
/// the mean of the 12 distances at that voxel, clamped to
/// [low_factor * m, high_factor * m] with m its image-wide mean. Reads outside the
/// grid clamp to the nearest edge voxel.
Volume ssc_descriptor(const Volume& v, const SscConfig& cfg = {});

}  // namespace dgtta
