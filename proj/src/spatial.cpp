#include "dgtta/spatial.hpp"

#include <cmath>
#include <numbers>

#include "dgtta/error.hpp"

namespace dgtta {

void SpatialConfig::validate() const {
  if (max_rotation_deg < 0 || max_scale_delta < 0 || max_scale_delta >= 1 || max_translation_vox < 0) {
    throw InvalidArgument("spatial ranges must be non-negative and max_scale_delta < 1");
  }
  if (!(validity_threshold > 0.0 && validity_threshold < 1.0)) {
    throw InvalidArgument("validity_threshold must lie in (0, 1)");
  }
  if (sentinel >= 0.0f && sentinel <= 1.0f) {
    throw InvalidArgument("sentinel must lie outside [0, 1]");
  }
}

void AffineAugmentation::check_invertible() const {
  if (!(std::fabs(matrix.determinant()) > 1e-8)) {
    throw InvalidArgument("affine matrix is singular");
  }
}

AffineAugmentation AffineAugmentation::inverse() const {
  check_invertible();
  AffineAugmentation inv = *this;
  inv.matrix = matrix.inverse();
  return inv;
}

AffineAugmentation sample_affine(const SpatialConfig& cfg, const Shape3& grid, std::mt19937_64& rng) {
  cfg.validate();
  auto uniform = [&](double half_range) {
    std::uniform_real_distribution<double> d(-half_range, half_range);
    return half_range > 0.0 ? d(rng) : (rng(), 0.0);
  };
  std::array<double, 3> angle{}, scale{}, shift{};
  for (auto& a : angle) a = uniform(cfg.max_rotation_deg) * std::numbers::pi / 180.0;
  for (auto& s : scale) s = 1.0 + uniform(cfg.max_scale_delta);
  for (auto& t : shift) t = uniform(cfg.max_translation_vox);

  auto rotation = [](int axis, double a) {
    Eigen::Matrix4d r = Eigen::Matrix4d::Identity();
    const int i = (axis + 1) % 3, j = (axis + 2) % 3;
    r(i, i) = std::cos(a);
    r(i, j) = -std::sin(a);
    r(j, i) = std::sin(a);
    r(j, j) = std::cos(a);
    return r;
  };
  Eigen::Matrix4d s = Eigen::Matrix4d::Identity();
  Eigen::Matrix4d to_centre = Eigen::Matrix4d::Identity();
  Eigen::Matrix4d from_centre = Eigen::Matrix4d::Identity();
  for (int a = 0; a < 3; ++a) {
    s(a, a) = scale[a];
    const double c = (static_cast<double>(grid[a]) - 1.0) / 2.0;
    to_centre(a, 3) = -c;
    from_centre(a, 3) = c + shift[a];
  }
  AffineAugmentation t;
  t.matrix = from_centre * rotation(0, angle[0]) * rotation(1, angle[1]) * rotation(2, angle[2]) * s * to_centre;
  t.sentinel = cfg.sentinel;
  t.validity_threshold = cfg.validity_threshold;
  return t;
}

SamplingPlan SamplingPlan::build(const Shape3& source_shape, const Shape3& output_shape,
                                 const Eigen::Matrix4d& output_to_source,
                                 std::span<const std::uint8_t> source_valid) {
  SamplingPlan plan;
  plan.source_shape = source_shape;
  plan.output_shape = output_shape;
  const std::size_t n = voxel_count(output_shape);
  plan.index.assign(n, {});
  plan.weight.assign(n, {});
  plan.validity.assign(n, 0.0f);
  const long sz = static_cast<long>(source_shape[0]), sy = static_cast<long>(source_shape[1]),
             sx = static_cast<long>(source_shape[2]);
  std::size_t o = 0;
  for (std::size_t z = 0; z < output_shape[0]; ++z)
    for (std::size_t y = 0; y < output_shape[1]; ++y)
      for (std::size_t x = 0; x < output_shape[2]; ++x, ++o) {
        const Eigen::Vector4d p(static_cast<double>(z), static_cast<double>(y), static_cast<double>(x), 1.0);
        const Eigen::Vector4d q = output_to_source * p;
        const double fz = std::floor(q[0]), fy = std::floor(q[1]), fx = std::floor(q[2]);
        const double tz = q[0] - fz, ty = q[1] - fy, tx = q[2] - fx;
        const long iz = static_cast<long>(fz), iy = static_cast<long>(fy), ix = static_cast<long>(fx);
        double total = 0.0;
        std::array<double, 8> w{};
        std::array<std::int32_t, 8> idx{};
        idx.fill(-1);
        for (int corner = 0; corner < 8; ++corner) {
          const int dz = (corner >> 2) & 1, dy = (corner >> 1) & 1, dx = corner & 1;
          const double cw = (dz ? tz : 1.0 - tz) * (dy ? ty : 1.0 - ty) * (dx ? tx : 1.0 - tx);
          const long cz = iz + dz, cy = iy + dy, cx = ix + dx;
          if (cw == 0.0 || cz < 0 || cy < 0 || cx < 0 || cz >= sz || cy >= sy || cx >= sx) continue;
          const auto flat = static_cast<std::int32_t>((cz * sy + cy) * sx + cx);
          if (!source_valid.empty() && !source_valid[static_cast<std::size_t>(flat)]) continue;
          idx[corner] = flat;
          w[corner] = cw;
          total += cw;
        }
        plan.validity[o] = static_cast<float>(total);
        for (int corner = 0; corner < 8; ++corner) {
          plan.index[o][corner] = idx[corner];
          plan.weight[o][corner] = total > 0.0 ? static_cast<float>(w[corner] / total) : 0.0f;
        }
      }
  return plan;
}

void SamplingPlan::apply(std::span<const float> src, std::span<float> dst, float fill) const {
  for (std::size_t o = 0; o < validity.size(); ++o) {
    if (validity[o] <= 0.0f) {
      dst[o] = fill;
      continue;
    }
    double acc = 0.0;
    for (int c = 0; c < 8; ++c) {
      if (index[o][c] >= 0) acc += static_cast<double>(weight[o][c]) * src[static_cast<std::size_t>(index[o][c])];
    }
    dst[o] = static_cast<float>(acc);
  }
}

void SamplingPlan::apply_adjoint(std::span<const float> grad_out, std::span<float> grad_src) const {
  for (std::size_t o = 0; o < validity.size(); ++o) {
    if (validity[o] <= 0.0f || grad_out[o] == 0.0f) continue;
    for (int c = 0; c < 8; ++c) {
      if (index[o][c] >= 0) grad_src[static_cast<std::size_t>(index[o][c])] += weight[o][c] * grad_out[o];
    }
  }
}

std::vector<float> SamplingPlan::transport(std::span<const float> field) const {
  std::vector<float> out(validity.size(), 0.0f);
  for (std::size_t o = 0; o < validity.size(); ++o) {
    double acc = 0.0;
    for (int c = 0; c < 8; ++c) {
      if (index[o][c] >= 0) {
        acc += static_cast<double>(weight[o][c]) * validity[o] * field[static_cast<std::size_t>(index[o][c])];
      }
    }
    out[o] = static_cast<float>(acc);
  }
  return out;
}

namespace {

Volume warp_through(const Volume& v, const Eigen::Matrix4d& output_to_source, const AffineAugmentation& t) {
  if (!v.all_finite()) throw InvalidArgument("warp input contains non-finite values");
  std::vector<std::uint8_t> valid(v.voxels(), 1);
  for (std::size_t c = 0; c < v.channels(); ++c) {
    const auto ch = v.channel(c);
    for (std::size_t i = 0; i < ch.size(); ++i) {
      if (ch[i] == t.sentinel) valid[i] = 0;
    }
  }
  const auto plan = SamplingPlan::build(v.shape(), v.shape(), output_to_source, valid);
  Volume out(v.channels(), v.shape(), v.spacing());
  for (std::size_t c = 0; c < v.channels(); ++c) {
    plan.apply(v.channel(c), out.channel(c), t.sentinel);
    auto dst = out.channel(c);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (static_cast<double>(plan.validity[i]) < t.validity_threshold) dst[i] = t.sentinel;
    }
  }
  return out;
}

}  // namespace

Volume warp(const Volume& v, const AffineAugmentation& t) {
  t.check_invertible();
  return warp_through(v, t.matrix.inverse(), t);
}

Volume inverse_warp(const Volume& v, const AffineAugmentation& t) {
  t.check_invertible();
  return warp_through(v, t.matrix, t);
}

std::size_t Mask::count() const {
  std::size_t n = 0;
  for (auto b : data) n += b ? 1 : 0;
  return n;
}

Mask consistency_mask(const Volume& a, const Volume& b, float sentinel) {
  if (a.shape() != b.shape() || a.channels() != b.channels()) {
    throw InvalidArgument("consistency_mask operands differ in shape");
  }
  Mask m{a.shape(), std::vector<std::uint8_t>(a.voxels(), 1)};
  for (std::size_t c = 0; c < a.channels(); ++c) {
    const auto ca = a.channel(c);
    const auto cb = b.channel(c);
    for (std::size_t i = 0; i < ca.size(); ++i) {
      if (ca[i] == sentinel || cb[i] == sentinel) m.data[i] = 0;
    }
  }
  return m;
}

}  // namespace dgtta
