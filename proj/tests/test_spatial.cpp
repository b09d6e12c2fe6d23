#include <gtest/gtest.h>

#include <cmath>

#include "dgtta/error.hpp"
#include "dgtta/spatial.hpp"
#include "oracles.hpp"

using namespace dgtta;

namespace {

Volume smooth(Shape3 n) {
  Volume v(1, n, {1.5, 1.5, 1.5});
  for (std::size_t z = 0; z < n[0]; ++z)
    for (std::size_t y = 0; y < n[1]; ++y)
      for (std::size_t x = 0; x < n[2]; ++x)
        v.at(0, z, y, x) = static_cast<float>(std::sin(0.21 * z + 0.3) * std::cos(0.17 * y) + 0.4 * std::cos(0.13 * x));
  return v;
}

AffineAugmentation translation(double dz, double dy, double dx) {
  AffineAugmentation t;
  t.matrix(0, 3) = dz;
  t.matrix(1, 3) = dy;
  t.matrix(2, 3) = dx;
  return t;
}

SpatialConfig zero_ranges() {
  SpatialConfig c;
  c.max_rotation_deg = c.max_scale_delta = c.max_translation_vox = 0.0;
  return c;
}

}  // namespace

TEST(SampleAffine, ZeroRangesGiveIdentity) {
  std::mt19937_64 rng(1);
  const auto t = sample_affine(zero_ranges(), {16, 16, 16}, rng);
  EXPECT_TRUE(t.matrix.isApprox(Eigen::Matrix4d::Identity(), 1e-12));
}

TEST(SampleAffine, SeededAndDeterminantBounded) {
  SpatialConfig cfg;
  std::mt19937_64 a(5), b(5);
  EXPECT_EQ(sample_affine(cfg, {20, 20, 20}, a).matrix, sample_affine(cfg, {20, 20, 20}, b).matrix);
  std::mt19937_64 rng(6);
  const double s = cfg.max_scale_delta;
  for (int i = 0; i < 200; ++i) {
    const double det = sample_affine(cfg, {20, 20, 20}, rng).matrix.determinant();
    EXPECT_GE(det, std::pow(1 - s, 3) - 1e-12);
    EXPECT_LE(det, std::pow(1 + s, 3) + 1e-12);
  }
}

TEST(SpatialConfig, Validation) {
  SpatialConfig c;
  c.sentinel = 0.5f;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.validity_threshold = 1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.max_scale_delta = 1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Warp, IdentityReproducesInput) {
  std::mt19937_64 rng(2);
  const Volume v = oracle::random_volume(rng, {7, 8, 9}, 2);
  const AffineAugmentation id;
  for (const Volume& w : {warp(v, id), inverse_warp(v, id)}) {
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(w.data()[i], v.data()[i]);
  }
}

TEST(Warp, SingularMatrixRejected) {
  AffineAugmentation t;
  t.matrix(1, 1) = 0.0;
  const Volume v(1, {4, 4, 4}, {1, 1, 1});
  EXPECT_THROW(warp(v, t), InvalidArgument);
  EXPECT_THROW(inverse_warp(v, t), InvalidArgument);
}

TEST(Warp, IntegerTranslationShiftsAndFillsSentinel) {
  std::mt19937_64 rng(3);
  const Volume v = oracle::random_volume(rng, {6, 5, 4});
  const auto t = translation(1, 0, 0);
  const Volume w = warp(v, t);
  const Volume iw = inverse_warp(v, t);
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      EXPECT_EQ(w.at(0, 0, y, x), t.sentinel);
      EXPECT_EQ(iw.at(0, 5, y, x), t.sentinel);
      for (std::size_t z = 1; z < 6; ++z) EXPECT_EQ(w.at(0, z, y, x), v.at(0, z - 1, y, x));
      for (std::size_t z = 0; z < 5; ++z) EXPECT_EQ(iw.at(0, z, y, x), v.at(0, z + 1, y, x));
    }
}

TEST(Warp, ConstantVolumeInFieldOnesOutOfFieldSentinel) {
  const Volume ones(1, {16, 16, 16}, {1, 1, 1}, 1.0f);
  std::mt19937_64 rng(4);
  const auto t = sample_affine(SpatialConfig{}, {16, 16, 16}, rng);
  std::size_t in = 0, out = 0;
  const Volume w = warp(ones, t);
  for (float f : w.data()) {
    if (f == t.sentinel) {
      ++out;
    } else {
      EXPECT_NEAR(f, 1.0f, 1e-6);
      ++in;
    }
  }
  EXPECT_GT(in, 0u);
  EXPECT_GT(out, 0u);
}

TEST(Warp, SentinelInputIsTreatedAsOutside) {
  const auto t = translation(1, 0, 0);
  const Volume w = warp(Volume(1, {6, 6, 6}, {1, 1, 1}, 2.0f), t);
  const Volume back = inverse_warp(w, t);
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 6; ++x) {
      EXPECT_EQ(back.at(0, 5, y, x), t.sentinel);
      for (std::size_t z = 0; z < 5; ++z) EXPECT_EQ(back.at(0, z, y, x), 2.0f);
    }
}

TEST(Warp, RoundTripOnSmoothVolume) {
  const Volume v = smooth({32, 32, 32});
  float lo = v.data()[0], hi = lo;
  for (float f : v.data()) lo = std::min(lo, f), hi = std::max(hi, f);
  std::mt19937_64 rng(5);
  for (int k = 0; k < 3; ++k) {
    const auto t = sample_affine(SpatialConfig{}, v.shape(), rng);
    const Volume back = inverse_warp(warp(v, t), t);
    const Mask m = consistency_mask(back, back, t.sentinel);
    ASSERT_GT(m.count(), v.voxels() / 2);
    double mae = 0.0;
    for (std::size_t i = 0; i < v.voxels(); ++i)
      if (m.data[i]) mae += std::fabs(back.data()[i] - v.data()[i]);
    EXPECT_LT(mae / m.count(), 0.01 * (hi - lo));
  }
}

TEST(ConsistencyMask, IdentityIsAllTrue) {
  std::mt19937_64 rng(6);
  const Volume v = oracle::random_volume(rng, {5, 5, 5});
  const AffineAugmentation id;
  EXPECT_EQ(consistency_mask(warp(v, id), warp(v, id), id.sentinel).count(), v.voxels());
}

TEST(ConsistencyMask, ShiftedSlabAndSymmetry) {
  const Volume v(1, {6, 6, 8}, {1, 1, 1}, 0.5f);
  const auto t = translation(0, 0, 2);
  const Volume a = warp(v, t), b = warp(v, AffineAugmentation{});
  const Mask m = consistency_mask(a, b, t.sentinel);
  const Mask r = consistency_mask(b, a, t.sentinel);
  EXPECT_EQ(m.data, r.data);
  for (std::size_t z = 0; z < 6; ++z)
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 8; ++x) EXPECT_EQ(m.data[(z * 6 + y) * 8 + x], x >= 2 ? 1 : 0);
}

TEST(ConsistencyMask, DisjointOutOfFieldRegions) {
  const Volume v(2, {6, 6, 6}, {1, 1, 1}, 0.25f);
  const auto ta = translation(2, 0, 0), tb = translation(0, -3, 0);
  const Mask m = consistency_mask(warp(v, ta), warp(v, tb), ta.sentinel);
  for (std::size_t z = 0; z < 6; ++z)
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 6; ++x) {
        const bool out_a = z < 2, out_b = y >= 3;
        EXPECT_EQ(m.data[(z * 6 + y) * 6 + x], (out_a || out_b) ? 0 : 1);
      }
}

TEST(ConsistencyMask, ShapeMismatch) {
  EXPECT_THROW(consistency_mask(Volume(1, {2, 2, 2}, {1, 1, 1}), Volume(1, {2, 2, 3}, {1, 1, 1}), -1e6f),
               InvalidArgument);
}

TEST(SamplingPlan, AdjointMatchesInnerProduct) {
  std::mt19937_64 rng(7);
  const Shape3 src{9, 8, 7}, dst{6, 6, 6};
  const auto t = sample_affine(SpatialConfig{}, src, rng);
  const auto plan = SamplingPlan::build(src, dst, t.matrix.inverse());
  const Volume u = oracle::random_volume(rng, src), w = oracle::random_volume(rng, dst);
  std::vector<float> au(voxel_count(dst)), atw(voxel_count(src), 0.0f);
  plan.apply(u.data(), au, 0.0f);
  plan.apply_adjoint(w.data(), atw);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < au.size(); ++i) lhs += double(au[i]) * w.data()[i];
  for (std::size_t i = 0; i < atw.size(); ++i) rhs += double(atw[i]) * u.data()[i];
  EXPECT_NEAR(lhs, rhs, 1e-4 * std::max(1.0, std::fabs(lhs)));
}
