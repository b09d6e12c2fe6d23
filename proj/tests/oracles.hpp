#pragma once

// Independent reference implementations. Each one evaluates the defining
// formula directly (nested loops, full enumeration) and shares no code with
// the library beyond the data types.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "dgtta/ssc.hpp"
#include "dgtta/volume.hpp"

namespace oracle {

using dgtta::LabelMap;
using dgtta::Shape3;
using dgtta::Spacing;
using dgtta::Volume;

inline Volume random_volume(std::mt19937_64& rng, Shape3 shape, std::size_t channels = 1, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Volume v(channels, shape, {1.0, 1.0, 1.0});
  for (auto& x : v.data()) x = static_cast<float>(u(rng));
  return v;
}

inline Shape3 random_shape(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  std::uniform_int_distribution<std::size_t> d(lo, hi);
  return {d(rng), d(rng), d(rng)};
}

// ---- SSC ---------------------------------------------------------------

inline double read_clamped(const std::vector<double>& img, const Shape3& n, long z, long y, long x) {
  z = std::clamp<long>(z, 0, static_cast<long>(n[0]) - 1);
  y = std::clamp<long>(y, 0, static_cast<long>(n[1]) - 1);
  x = std::clamp<long>(x, 0, static_cast<long>(n[2]) - 1);
  return img[(static_cast<std::size_t>(z) * n[1] + static_cast<std::size_t>(y)) * n[2] + static_cast<std::size_t>(x)];
}

/// The 12 diagonal pairs, rebuilt by enumerating all 15 pairs of the
/// 6-neighbourhood and dropping the 3 antipodal ones.
inline std::vector<std::array<std::array<int, 3>, 2>> diagonal_pairs(int d) {
  std::vector<std::array<int, 3>> six;
  for (int a = 0; a < 3; ++a)
    for (int s : {-d, d}) {
      std::array<int, 3> o{0, 0, 0};
      o[a] = s;
      six.push_back(o);
    }
  std::sort(six.begin(), six.end());
  std::vector<std::array<std::array<int, 3>, 2>> out;
  for (std::size_t i = 0; i < six.size(); ++i)
    for (std::size_t j = i + 1; j < six.size(); ++j) {
      bool antipodal = true;
      for (int a = 0; a < 3; ++a) antipodal = antipodal && six[i][a] == -six[j][a];
      if (!antipodal) out.push_back({six[i], six[j]});
    }
  return out;
}

/// Per-voxel, per-pair evaluation of exp(-SSD / sigma^2) with explicit patch
/// extraction. Double precision throughout.
inline Volume ssc(const Volume& v, const dgtta::SscConfig& cfg) {
  const Shape3 n = v.shape();
  const std::size_t nv = dgtta::voxel_count(n);
  std::vector<double> img(nv);
  for (std::size_t i = 0; i < nv; ++i) img[i] = v.data()[i];
  if (cfg.normalize_input) {
    double mean = 0.0;
    for (double x : img) mean += x;
    mean /= static_cast<double>(nv);
    double var = 0.0;
    for (double x : img) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(nv));
    for (double& x : img) x = sd > 0.0 ? (x - mean) / sd : 0.0;
    // Match the float storage of the normalized image.
    for (double& x : img) x = static_cast<double>(static_cast<float>(x));
  }
  const auto pairs = diagonal_pairs(cfg.patch_distance);
  const int p = cfg.patch_size;
  const int lo = -(p - 1) / 2;
  std::vector<std::array<double, 12>> ssd(nv);
  std::vector<double> sigma(nv, 0.0);
  for (std::size_t z = 0; z < n[0]; ++z)
    for (std::size_t y = 0; y < n[1]; ++y)
      for (std::size_t x = 0; x < n[2]; ++x) {
        const std::size_t i = (z * n[1] + y) * n[2] + x;
        for (std::size_t k = 0; k < 12; ++k) {
          const auto& [a, b] = pairs[k];
          double s = 0.0;
          for (int qz = lo; qz < lo + p; ++qz)
            for (int qy = lo; qy < lo + p; ++qy)
              for (int qx = lo; qx < lo + p; ++qx) {
                const long cz = static_cast<long>(z) + qz, cy = static_cast<long>(y) + qy, cx = static_cast<long>(x) + qx;
                const double va = read_clamped(img, n, cz + a[0], cy + a[1], cx + a[2]);
                const double vb = read_clamped(img, n, cz + b[0], cy + b[1], cx + b[2]);
                s += (va - vb) * (va - vb);
              }
          ssd[i][k] = s;
          sigma[i] += s / 12.0;
        }
      }
  double m = 0.0;
  for (double s : sigma) m += s;
  m /= static_cast<double>(nv);
  Volume out(12, n, v.spacing());
  for (std::size_t i = 0; i < nv; ++i) {
    const double s2 = std::clamp(sigma[i], cfg.low_factor * m, cfg.high_factor * m) + cfg.stability_eps;
    for (std::size_t k = 0; k < 12; ++k) out.data()[k * nv + i] = static_cast<float>(std::exp(-ssd[i][k] / s2));
  }
  return out;
}

// ---- HD95 --------------------------------------------------------------

inline std::vector<std::array<int, 3>> surface(const LabelMap& l, int c) {
  const Shape3 n = l.shape();
  auto in = [&](long z, long y, long x) {
    if (z < 0 || y < 0 || x < 0 || z >= static_cast<long>(n[0]) || y >= static_cast<long>(n[1]) ||
        x >= static_cast<long>(n[2]))
      return false;
    return l.at(static_cast<std::size_t>(z), static_cast<std::size_t>(y), static_cast<std::size_t>(x)) == c;
  };
  std::vector<std::array<int, 3>> out;
  for (long z = 0; z < static_cast<long>(n[0]); ++z)
    for (long y = 0; y < static_cast<long>(n[1]); ++y)
      for (long x = 0; x < static_cast<long>(n[2]); ++x) {
        if (!in(z, y, x)) continue;
        if (!in(z - 1, y, x) || !in(z + 1, y, x) || !in(z, y - 1, x) || !in(z, y + 1, x) || !in(z, y, x - 1) ||
            !in(z, y, x + 1))
          out.push_back({static_cast<int>(z), static_cast<int>(y), static_cast<int>(x)});
      }
  return out;
}

inline std::vector<double> directed(const std::vector<std::array<int, 3>>& from,
                                    const std::vector<std::array<int, 3>>& to, const Spacing& s) {
  std::vector<double> out;
  for (const auto& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to) {
      const double dz = (a[0] - b[0]) * s[0], dy = (a[1] - b[1]) * s[1], dx = (a[2] - b[2]) * s[2];
      best = std::min(best, dz * dz + dy * dy + dx * dx);
    }
    out.push_back(std::sqrt(best));
  }
  return out;
}

inline double percentile95(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double pos = 0.95 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Pooled all-pairs HD95; negative when either mask is empty.
inline double hd95_pooled(const LabelMap& p, const LabelMap& r, int c, const Spacing& s) {
  const auto sp = surface(p, c), sr = surface(r, c);
  if (sp.empty() || sr.empty()) return -1.0;
  auto d = directed(sp, sr, s);
  const auto e = directed(sr, sp, s);
  d.insert(d.end(), e.begin(), e.end());
  return percentile95(d);
}

// ---- Wilcoxon ----------------------------------------------------------

/// One-sided p-value P(W+ >= observed) by enumerating all 2^n sign vectors
/// over the (average) ranks of |x - y|, zero differences dropped.
inline double wilcoxon_enumerate(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != y[i]) d.push_back(x[i] - y[i]);
  const std::size_t n = d.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0.0, equal = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::fabs(d[j]) < std::fabs(d[i])) less += 1.0;
      if (std::fabs(d[j]) == std::fabs(d[i])) equal += 1.0;
    }
    rank[i] = less + (equal + 1.0) / 2.0;
  }
  double observed = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) observed += rank[i];
  std::uint64_t hits = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1U) w += rank[i];
    if (w >= observed - 1e-9) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

// ---- Consistency loss --------------------------------------------------

/// Direct summation of 1 - mean_{n,c} (e + sum 2ab) / (e + sum a^d + b^d)
/// over masked voxels. Layout (batch, classes, voxels).
inline double consistency_loss(const std::vector<double>& a, const std::vector<double>& b,
                               const std::vector<std::uint8_t>& mask, std::size_t batch, std::size_t classes,
                               std::size_t voxels, const std::vector<int>& subset, int d, double e) {
  double acc = 0.0;
  for (std::size_t n = 0; n < batch; ++n)
    for (int c : subset) {
      double num = e, den = e;
      for (std::size_t i = 0; i < voxels; ++i) {
        const std::size_t m = mask.size() == voxels ? i : n * voxels + i;
        if (!mask[m]) continue;
        const double x = a[(n * classes + static_cast<std::size_t>(c)) * voxels + i];
        const double y = b[(n * classes + static_cast<std::size_t>(c)) * voxels + i];
        num += 2.0 * x * y;
        den += std::pow(x, d) + std::pow(y, d);
      }
      acc += num / den;
    }
  return 1.0 - acc / static_cast<double>(batch * subset.size());
}

}  // namespace oracle
