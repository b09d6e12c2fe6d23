#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "dgtta/error.hpp"
#include "dgtta/io.hpp"
#include "dgtta/volume.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dgtta;

namespace {

Volume ramp(Shape3 n, Spacing s, double a, double b, double c) {
  Volume v(1, n, s);
  for (std::size_t z = 0; z < n[0]; ++z)
    for (std::size_t y = 0; y < n[1]; ++y)
      for (std::size_t x = 0; x < n[2]; ++x) v.at(0, z, y, x) = static_cast<float>(a * z + b * y + c * x);
  return v;
}

Volume smooth(Shape3 n, Spacing s) {
  Volume v(1, n, s);
  for (std::size_t z = 0; z < n[0]; ++z)
    for (std::size_t y = 0; y < n[1]; ++y)
      for (std::size_t x = 0; x < n[2]; ++x)
        v.at(0, z, y, x) = static_cast<float>(std::sin(0.2 * z) * std::cos(0.15 * y) + 0.5 * std::sin(0.1 * x + 1.0));
  return v;
}

}  // namespace

TEST(Volume, RejectsNonPositiveSpacing) {
  EXPECT_THROW(Volume(1, {2, 2, 2}, {1.0, 0.0, 1.0}), InvalidArgument);
  Volume v(1, {2, 2, 2}, {1.0, 1.0, 1.0});
  EXPECT_THROW(resample(v, {1.0, -1.0, 1.0}), InvalidArgument);
  LabelMap l({2, 2, 2}, {1.0, 1.0, 1.0}, 2);
  EXPECT_THROW(resample_labels(l, {0.0, 1.0, 1.0}), InvalidArgument);
}

TEST(Volume, LabelValidation) {
  LabelMap l({2, 2, 2}, {1.0, 1.0, 1.0}, 3);
  EXPECT_NO_THROW(l.validate());
  l.at(1, 1, 1) = 3;
  EXPECT_THROW(l.validate(), InvalidArgument);
}

TEST(Resample, IdentitySpacingReproducesVolume) {
  std::mt19937_64 rng(1);
  Volume v = oracle::random_volume(rng, {7, 9, 5});
  v.set_spacing({1.5, 1.5, 1.5});
  const Volume r = resample(v, {1.5, 1.5, 1.5});
  ASSERT_EQ(r.shape(), v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(r.data()[i], v.data()[i], 1e-6);
}

TEST(Resample, ShapeArithmetic) {
  const Volume v(1, {64, 64, 64}, {3.0, 3.0, 3.0}, 2.0f);
  const Volume r = resample(v, {1.5, 1.5, 1.5});
  EXPECT_EQ(r.shape(), (Shape3{128, 128, 128}));
  EXPECT_EQ(r.spacing(), (Spacing{1.5, 1.5, 1.5}));
  // Round-half-up on 5 * 1.0 / 2.0 = 2.5 -> 3.
  EXPECT_EQ(resample(Volume(1, {5, 5, 5}, {1.0, 1.0, 1.0}), {2.0, 2.0, 2.0}).shape(), (Shape3{3, 3, 3}));
}

TEST(Resample, ConstantVolumeExact) {
  const Volume v(2, {6, 5, 4}, {1.0, 2.0, 0.7}, 3.25f);
  const Volume r = resample(v, {0.6, 1.3, 1.9});
  for (float x : r.data()) EXPECT_EQ(x, 3.25f);
}

TEST(Resample, LinearRampInteriorMatchesClosedForm) {
  const double a = 0.7, b = -1.3, c = 2.1;
  const Volume v = ramp({10, 12, 8}, {2.0, 2.0, 2.0}, a, b, c);
  const Volume r = resample(v, {1.0, 1.0, 1.0});
  ASSERT_EQ(r.shape(), (Shape3{20, 24, 16}));
  for (std::size_t z = 1; z + 1 < 20; ++z)
    for (std::size_t y = 1; y + 1 < 24; ++y)
      for (std::size_t x = 1; x + 1 < 16; ++x) {
        const double sz = (z + 0.5) * 0.5 - 0.5, sy = (y + 0.5) * 0.5 - 0.5, sx = (x + 0.5) * 0.5 - 0.5;
        EXPECT_NEAR(r.at(0, z, y, x), a * sz + b * sy + c * sx, 1e-5);
      }
}

TEST(Resample, RoundTripOnSmoothVolume) {
  const Volume v = smooth({24, 24, 24}, {1.5, 1.5, 1.5});
  const Volume back = resample(resample(v, {0.75, 0.75, 0.75}), {1.5, 1.5, 1.5});
  ASSERT_EQ(back.shape(), v.shape());
  float lo = v.data()[0], hi = lo;
  for (float x : v.data()) lo = std::min(lo, x), hi = std::max(hi, x);
  double mae = 0.0;
  std::size_t n = 0;
  for (std::size_t z = 1; z < 23; ++z)
    for (std::size_t y = 1; y < 23; ++y)
      for (std::size_t x = 1; x < 23; ++x, ++n) mae += std::fabs(back.at(0, z, y, x) - v.at(0, z, y, x));
  EXPECT_LT(mae / n, 0.01 * (hi - lo));
}

TEST(ResampleLabels, IdentityAndBackground) {
  LabelMap l({4, 5, 6}, {1.5, 1.5, 1.5}, 3);
  for (std::size_t i = 0; i < l.voxels(); ++i) l.labels()[i] = static_cast<int>(i % 3);
  const LabelMap same = resample_labels(l, {1.5, 1.5, 1.5});
  EXPECT_TRUE(std::equal(same.labels().begin(), same.labels().end(), l.labels().begin()));

  const LabelMap bg({4, 4, 4}, {2.0, 2.0, 2.0}, 2);
  const LabelMap up = resample_labels(bg, {1.0, 1.0, 1.0});
  EXPECT_EQ(up.shape(), (Shape3{8, 8, 8}));
  for (auto x : up.labels()) EXPECT_EQ(x, 0);
}

TEST(ResampleLabels, HalfSplitBoundaryNearAnalyticPlane) {
  LabelMap l({8, 8, 8}, {2.0, 2.0, 2.0}, 2);
  for (std::size_t z = 0; z < 8; ++z)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 4; x < 8; ++x) l.at(z, y, x) = 1;
  const LabelMap up = resample_labels(l, {1.0, 1.0, 1.0});
  // The plane sits at physical x = 8 mm, i.e. between output voxels 7 and 8.
  for (std::size_t z = 0; z < 16; ++z)
    for (std::size_t y = 0; y < 16; ++y) {
      std::size_t first = 16;
      for (std::size_t x = 0; x < 16; ++x)
        if (up.at(z, y, x) == 1) {
          first = std::min(first, x);
        }
      EXPECT_LE(std::abs(static_cast<long>(first) - 8), 1);
      for (std::size_t x = first; x < 16; ++x) EXPECT_EQ(up.at(z, y, x), 1);
    }
}

TEST(RawIo, RoundTripIsBitExact) {
  testutil::TempDir dir("rawio");
  std::mt19937_64 rng(3);
  Volume v = oracle::random_volume(rng, {16, 16, 16}, 2, -1e6, 1e6);
  v.data()[0] = std::numeric_limits<float>::denorm_min();
  v.data()[1] = -0.0f;
  v.set_spacing({0.9, 1.1, 3.3});
  save_volume(v, dir / "vol");
  const Volume r = load_volume(dir / "vol.bin");
  EXPECT_EQ(r.shape(), v.shape());
  EXPECT_EQ(r.channels(), 2u);
  EXPECT_EQ(r.spacing(), v.spacing());
  EXPECT_EQ(std::memcmp(r.data().data(), v.data().data(), v.size() * sizeof(float)), 0);

  LabelMap l({3, 4, 5}, {1.0, 1.0, 1.0}, 4);
  for (std::size_t i = 0; i < l.voxels(); ++i) l.labels()[i] = static_cast<int>(i % 4);
  save_labels(l, dir / "lab");
  const LabelMap lr = load_labels(dir / "lab.meta");
  EXPECT_EQ(lr.num_classes(), 4);
  EXPECT_TRUE(std::equal(lr.labels().begin(), lr.labels().end(), l.labels().begin()));
}

TEST(RawIo, MissingSpacingNamesTheField) {
  testutil::TempDir dir("rawmeta");
  save_volume(Volume(1, {2, 2, 2}, {1.0, 1.0, 1.0}), dir / "v");
  std::ifstream in(dir / "v.meta");
  std::string text, line;
  while (std::getline(in, line))
    if (line.rfind("spacing", 0) != 0) text += line + "\n";
  in.close();
  std::ofstream(dir / "v.meta") << text;
  try {
    load_volume(dir / "v");
    FAIL() << "expected a format error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("spacing"), std::string::npos);
  }
}

TEST(RawIo, TruncatedPayloadIsFormatError) {
  testutil::TempDir dir("rawtrunc");
  save_volume(Volume(1, {4, 4, 4}, {1.0, 1.0, 1.0}), dir / "v");
  std::filesystem::resize_file(dir / "v.bin", 10);
  EXPECT_THROW(load_volume(dir / "v"), FormatError);
}

TEST(Nifti, ReferenceWrittenFloatFixture) {
  const Volume v = load_volume(std::filesystem::path(DGTTA_TEST_DATA) / "ramp_f32.nii.gz");
  ASSERT_EQ(v.shape(), (Shape3{3, 4, 5}));
  EXPECT_NEAR(v.spacing()[0], 2.0, 1e-6);
  EXPECT_NEAR(v.spacing()[1], 1.2, 1e-6);
  EXPECT_NEAR(v.spacing()[2], 0.8, 1e-6);
  for (std::size_t z = 0; z < 3; ++z)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 5; ++x) EXPECT_EQ(v.at(0, z, y, x), 100.0f * z + 10.0f * y + x);
}

TEST(Nifti, ReferenceWrittenLabelsAndScaling) {
  const LabelMap l = load_labels(std::filesystem::path(DGTTA_TEST_DATA) / "labels_i16.nii");
  ASSERT_EQ(l.shape(), (Shape3{3, 4, 5}));
  EXPECT_EQ(l.num_classes(), 3);
  for (std::size_t z = 0; z < 3; ++z)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 5; ++x) EXPECT_EQ(l.at(z, y, x), static_cast<int>((x + y + z) % 3));

  const Volume s = load_volume(std::filesystem::path(DGTTA_TEST_DATA) / "scaled_i16.nii.gz");
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_FLOAT_EQ(s.data()[i], 0.5f * i - 3.0f);
}

TEST(Nifti, WriteReadRoundTrip) {
  testutil::TempDir dir("nifti");
  std::mt19937_64 rng(5);
  Volume v = oracle::random_volume(rng, {6, 7, 8});
  v.set_spacing({1.25, 0.5, 2.0});
  for (const char* name : {"a.nii", "b.nii.gz"}) {
    save_volume(v, dir / name);
    const Volume r = load_volume(dir / name);
    EXPECT_EQ(r.shape(), v.shape());
    EXPECT_EQ(r.spacing(), v.spacing());
    EXPECT_EQ(std::memcmp(r.data().data(), v.data().data(), v.size() * sizeof(float)), 0);
  }
}

TEST(Nifti, BadMagicIsFormatError) {
  testutil::TempDir dir("niftibad");
  std::ofstream(dir / "x.nii", std::ios::binary) << std::string(400, '\0');
  EXPECT_THROW(load_volume(dir / "x.nii"), FormatError);
}

TEST(Volume, ZNormalizeAndCrop) {
  std::mt19937_64 rng(9);
  const Volume v = oracle::random_volume(rng, {5, 6, 7}, 1, 10.0, 30.0);
  const Volume z = znormalize(v);
  double m = 0.0, s = 0.0;
  for (float x : z.data()) m += x;
  m /= z.size();
  for (float x : z.data()) s += (x - m) * (x - m);
  EXPECT_NEAR(m, 0.0, 1e-5);
  EXPECT_NEAR(std::sqrt(s / z.size()), 1.0, 1e-5);
  const Volume flat = znormalize(Volume(1, {2, 2, 2}, {1, 1, 1}, 4.0f));
  for (float x : flat.data()) EXPECT_EQ(x, 0.0f);

  const Volume c = crop(v, {1, 2, 3}, {2, 3, 4});
  EXPECT_EQ(c.at(0, 1, 2, 3), v.at(0, 2, 4, 6));
  EXPECT_THROW(crop(v, {4, 0, 0}, {2, 1, 1}), InvalidArgument);
}
