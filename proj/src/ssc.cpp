#include "dgtta/ssc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dgtta/error.hpp"

namespace dgtta {

void SscConfig::validate() const {
  if (patch_size < 1) throw InvalidArgument("ssc patch_size must be >= 1");
  if (patch_distance < 1) throw InvalidArgument("ssc patch_distance must be >= 1");
  if (!(low_factor > 0.0 && low_factor < 1.0 && high_factor > 1.0)) {
    throw InvalidArgument("ssc variance clamp needs 0 < low_factor < 1 < high_factor");
  }
  if (!(stability_eps > 0.0)) throw InvalidArgument("ssc stability_eps must be positive");
}

std::array<OffsetPair, kSscChannels> diagonal_pair_table(int patch_distance) {
  if (patch_distance < 1) throw InvalidArgument("patch_distance must be >= 1");
  const int d = patch_distance;
  std::array<VoxelOffset, 6> six{{{-d, 0, 0}, {0, -d, 0}, {0, 0, -d}, {0, 0, d}, {0, d, 0}, {d, 0, 0}}};
  std::sort(six.begin(), six.end());
  std::array<OffsetPair, kSscChannels> table{};
  std::size_t k = 0;
  for (std::size_t i = 0; i < six.size(); ++i) {
    for (std::size_t j = i + 1; j < six.size(); ++j) {
      int dist2 = 0;
      for (int a = 0; a < 3; ++a) dist2 += (six[i][a] - six[j][a]) * (six[i][a] - six[j][a]);
      if (dist2 == 2 * d * d) table[k++] = {six[i], six[j]};
    }
  }
  return table;
}

namespace {

inline std::size_t clamp_index(long i, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(n) - 1));
}

// Sum of a padded 1D run of length n + 2r into n outputs over a window of
// `size` samples starting at offset lo (relative to the output index).
void box_sum_axis(const std::vector<double>& in, std::vector<double>& out,
                  const std::array<std::size_t, 3>& in_ext, const std::array<std::size_t, 3>& out_ext,
                  int axis, int size) {
  out.assign(out_ext[0] * out_ext[1] * out_ext[2], 0.0);
  for (std::size_t z = 0; z < out_ext[0]; ++z)
    for (std::size_t y = 0; y < out_ext[1]; ++y)
      for (std::size_t x = 0; x < out_ext[2]; ++x) {
        double acc = 0.0;
        for (int q = 0; q < size; ++q) {
          std::array<std::size_t, 3> p{z, y, x};
          p[axis] += static_cast<std::size_t>(q);
          acc += in[(p[0] * in_ext[1] + p[1]) * in_ext[2] + p[2]];
        }
        out[(z * out_ext[1] + y) * out_ext[2] + x] = acc;
      }
}

}  // namespace

Volume ssc_descriptor(const Volume& v, const SscConfig& cfg) {
  cfg.validate();
  if (v.channels() != 1) {
    throw InvalidArgument("ssc_descriptor expects a single-channel volume, got " +
                          std::to_string(v.channels()) + " channels");
  }
  if (!v.all_finite()) throw InvalidArgument("ssc_descriptor input contains non-finite values");

  const Volume src = cfg.normalize_input ? znormalize(v) : v;
  const Shape3 n = v.shape();
  const std::size_t nvox = voxel_count(n);
  const auto table = diagonal_pair_table(cfg.patch_distance);

  // Patch offsets span [lo, lo + size) along each axis, centred on the voxel.
  const int size = cfg.patch_size;
  const int lo = -(size - 1) / 2;
  const std::size_t pad = static_cast<std::size_t>(size - 1);
  const std::array<std::size_t, 3> ext{n[0] + pad, n[1] + pad, n[2] + pad};

  std::vector<std::vector<double>> ssd(kSscChannels);
  std::vector<double> diff(ext[0] * ext[1] * ext[2]);
  std::vector<double> tmp_a, tmp_b;
  for (std::size_t k = 0; k < kSscChannels; ++k) {
    const auto& [oa, ob] = table[k];
    // Squared differences on the grid extended by the patch footprint so that
    // every read is clamped exactly once, at its final coordinate.
    for (std::size_t z = 0; z < ext[0]; ++z)
      for (std::size_t y = 0; y < ext[1]; ++y)
        for (std::size_t x = 0; x < ext[2]; ++x) {
          const long pz = static_cast<long>(z) + lo, py = static_cast<long>(y) + lo,
                     px = static_cast<long>(x) + lo;
          const float a = src.at(0, clamp_index(pz + oa[0], n[0]), clamp_index(py + oa[1], n[1]),
                                 clamp_index(px + oa[2], n[2]));
          const float b = src.at(0, clamp_index(pz + ob[0], n[0]), clamp_index(py + ob[1], n[1]),
                                 clamp_index(px + ob[2], n[2]));
          const double dd = static_cast<double>(a) - static_cast<double>(b);
          diff[(z * ext[1] + y) * ext[2] + x] = dd * dd;
        }
    if (size == 1) {
      ssd[k] = diff;
      continue;
    }
    const std::array<std::size_t, 3> e1{ext[0], ext[1], n[2]};
    const std::array<std::size_t, 3> e2{ext[0], n[1], n[2]};
    box_sum_axis(diff, tmp_a, ext, e1, 2, size);
    box_sum_axis(tmp_a, tmp_b, e1, e2, 1, size);
    box_sum_axis(tmp_b, ssd[k], e2, {n[0], n[1], n[2]}, 0, size);
  }

  std::vector<double> variance(nvox, 0.0);
  for (std::size_t i = 0; i < nvox; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < kSscChannels; ++k) acc += ssd[k][i];
    variance[i] = acc / static_cast<double>(kSscChannels);
  }
  double mean_variance = 0.0;
  for (double s : variance) mean_variance += s;
  mean_variance /= static_cast<double>(nvox);
  const double vlo = cfg.low_factor * mean_variance;
  const double vhi = cfg.high_factor * mean_variance;

  Volume out(kSscChannels, n, v.spacing());
  const double tiny = static_cast<double>(std::numeric_limits<float>::min());
  for (std::size_t k = 0; k < kSscChannels; ++k) {
    auto dst = out.channel(k);
    for (std::size_t i = 0; i < nvox; ++i) {
      const double denom = std::clamp(variance[i], vlo, vhi) + cfg.stability_eps;
      dst[i] = static_cast<float>(std::max(std::exp(-ssd[k][i] / denom), tiny));
    }
  }
  return out;
}

}  // namespace dgtta
