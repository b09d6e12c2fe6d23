#include "dgtta/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dgtta/error.hpp"

namespace dgtta {

namespace {

void check_pair(const LabelMap& a, const LabelMap& b) {
  if (a.shape() != b.shape()) throw InvalidArgument("label maps differ in shape");
}

}  // namespace

double dice_score(const LabelMap& pred, const LabelMap& ref, int class_id) {
  check_pair(pred, ref);
  std::size_t p = 0, r = 0, both = 0;
  const auto lp = pred.labels(), lr = ref.labels();
  for (std::size_t i = 0; i < lp.size(); ++i) {
    const bool a = lp[i] == class_id, b = lr[i] == class_id;
    p += a;
    r += b;
    both += a && b;
  }
  if (p + r == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + r);
}

std::vector<VoxelIndex> surface_voxels(const LabelMap& l, int class_id) {
  const auto& s = l.shape();
  const int nz = static_cast<int>(s[0]), ny = static_cast<int>(s[1]), nx = static_cast<int>(s[2]);
  auto inside = [&](int z, int y, int x) {
    if (z < 0 || y < 0 || x < 0 || z >= nz || y >= ny || x >= nx) return false;
    return l.at(std::size_t(z), std::size_t(y), std::size_t(x)) == class_id;
  };
  std::vector<VoxelIndex> out;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        if (!inside(z, y, x)) continue;
        if (!inside(z - 1, y, x) || !inside(z + 1, y, x) || !inside(z, y - 1, x) || !inside(z, y + 1, x) ||
            !inside(z, y, x - 1) || !inside(z, y, x + 1)) {
          out.push_back({z, y, x});
        }
      }
  return out;
}

namespace {

class KdTree {
 public:
  KdTree(std::vector<VoxelIndex> points, const Spacing& s) : pts_(std::move(points)), s_(s) {
    build(0, pts_.size(), 0);
  }

  double nearest_squared(const VoxelIndex& q) const {
    double best = std::numeric_limits<double>::infinity();
    search(q, 0, pts_.size(), 0, best);
    return best;
  }

 private:
  // Points [lo, hi) are arranged so that the median on `axis` sits at mid.
  void build(std::size_t lo, std::size_t hi, int axis) {
    if (hi - lo <= 1) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(pts_.begin() + static_cast<long>(lo), pts_.begin() + static_cast<long>(mid),
                     pts_.begin() + static_cast<long>(hi),
                     [axis](const VoxelIndex& a, const VoxelIndex& b) { return a[axis] < b[axis]; });
    build(lo, mid, (axis + 1) % 3);
    build(mid + 1, hi, (axis + 1) % 3);
  }

  void search(const VoxelIndex& q, std::size_t lo, std::size_t hi, int axis, double& best) const {
    if (lo >= hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const VoxelIndex& p = pts_[mid];
    best = std::min(best, squared_distance(q, p, s_));
    const double d = static_cast<double>(q[axis] - p[axis]) * s_[axis];
    const int next = (axis + 1) % 3;
    if (d < 0) {
      search(q, lo, mid, next, best);
      if (d * d <= best) search(q, mid + 1, hi, next, best);
    } else {
      search(q, mid + 1, hi, next, best);
      if (d * d <= best) search(q, lo, mid, next, best);
    }
  }

  std::vector<VoxelIndex> pts_;
  Spacing s_;
};

}  // namespace

std::vector<double> nearest_distances(const std::vector<VoxelIndex>& queries, const std::vector<VoxelIndex>& targets,
                                      const Spacing& spacing) {
  if (targets.empty()) throw InvalidArgument("nearest-distance target set is empty");
  const KdTree tree(targets, spacing);
  std::vector<double> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(std::sqrt(tree.nearest_squared(q)));
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of an empty set");
  if (!(q >= 0.0 && q <= 100.0)) throw InvalidArgument("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

SurfaceDistance hd95(const LabelMap& pred, const LabelMap& ref, int class_id, const Spacing& spacing,
                     HausdorffVariant variant) {
  check_pair(pred, ref);
  validate_spacing(spacing);
  const auto sp = surface_voxels(pred, class_id);
  const auto sr = surface_voxels(ref, class_id);
  if (sp.empty() && sr.empty()) return {std::nullopt, "class absent from prediction and reference"};
  if (sp.empty()) return {std::nullopt, "class absent from prediction"};
  if (sr.empty()) return {std::nullopt, "class absent from reference"};
  auto d_pr = nearest_distances(sp, sr, spacing);
  auto d_rp = nearest_distances(sr, sp, spacing);
  if (variant == HausdorffVariant::MaxDirected) {
    return {std::max(percentile(std::move(d_pr), 95.0), percentile(std::move(d_rp), 95.0)), ""};
  }
  d_pr.insert(d_pr.end(), d_rp.begin(), d_rp.end());
  return {percentile(std::move(d_pr), 95.0), ""};
}

}  // namespace dgtta
