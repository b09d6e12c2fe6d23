#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dgtta/error.hpp"
#include "dgtta/losses.hpp"
#include "oracles.hpp"

using namespace dgtta;

namespace {

template <typename T>
nn::Tensor<T> random_probs(std::mt19937_64& rng, std::size_t b, std::size_t c, Shape3 s) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  nn::Tensor<T> t(b, c, s);
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t i = 0; i < t.voxels(); ++i) {
      double sum = 0.0;
      for (std::size_t k = 0; k < c; ++k) sum += t.channel(n, k)[i] = static_cast<T>(u(rng));
      for (std::size_t k = 0; k < c; ++k) t.channel(n, k)[i] = static_cast<T>(t.channel(n, k)[i] / sum);
    }
  return t;
}

std::vector<std::uint8_t> random_mask(std::mt19937_64& rng, std::size_t n, double keep = 0.7) {
  std::bernoulli_distribution b(keep);
  std::vector<std::uint8_t> m(n);
  for (auto& x : m) x = b(rng);
  m[0] = 1;
  return m;
}

std::vector<double> as_double(const nn::Tensor<double>& t) { return {t.data.begin(), t.data.end()}; }

// Independent double-loop evaluation of CE + soft Dice (d = 1, one-hot target).
double supervised_oracle(const nn::Tensor<double>& p, const std::vector<std::int32_t>& t, double wce, double wdice,
                         double eps) {
  const std::size_t nb = p.batch, nc = p.channels, nv = p.voxels();
  double ce = 0.0;
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t i = 0; i < nv; ++i) ce += -std::log(p.channel(b, static_cast<std::size_t>(t[b * nv + i]))[i]);
  ce /= static_cast<double>(nb * nv);
  double dice = 0.0;
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t c = 1; c < nc; ++c) {
      double inter = 0.0, sp = 0.0, sy = 0.0;
      for (std::size_t i = 0; i < nv; ++i) {
        const double y = t[b * nv + i] == static_cast<int>(c);
        inter += p.channel(b, c)[i] * y;
        sp += p.channel(b, c)[i];
        sy += y;
      }
      dice += (2 * inter + eps) / (sp + sy + eps);
    }
  return wce * ce + wdice * (1.0 - dice / static_cast<double>(nb * (nc - 1)));
}

}  // namespace

TEST(SupervisedLoss, PerfectPredictionNearZero) {
  nn::Tensor<double> p(1, 3, {4, 4, 4});
  std::vector<std::int32_t> t(64);
  for (std::size_t i = 0; i < 64; ++i) {
    t[i] = static_cast<int>(i % 3);
    p.channel(0, i % 3)[i] = 1.0;
  }
  EXPECT_LE(supervised_loss(p, t, {}), 1e-3);
  EXPECT_GE(supervised_loss(p, t, {}), 0.0);
}

TEST(SupervisedLoss, UniformTwoClassCrossEntropyIsLn2) {
  nn::Tensor<double> p(2, 2, {3, 3, 3}, 0.5);
  std::vector<std::int32_t> t(54, 1);
  EXPECT_NEAR(supervised_loss(p, t, {1.0, 0.0}), std::numbers::ln2, 1e-12);
}

TEST(SupervisedLoss, MatchesOracleAndFiniteDifferences) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> lab(0, 3);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = random_probs<double>(rng, 2, 4, {3, 4, 5});
    std::vector<std::int32_t> t(2 * p.voxels());
    for (auto& x : t) x = lab(rng);
    const LossWeights w{0.7, 1.3};
    nn::Tensor<double> g;
    const double got = supervised_loss(p, t, w, &g);
    EXPECT_NEAR(got, supervised_oracle(p, t, w.ce, w.dice, kSupervisedDiceEps), 1e-6);
    for (std::size_t i = 0; i < p.data.size(); i += 7) {
      const double orig = p.data[i];
      p.data[i] = orig + 1e-6;
      const double up = supervised_loss(p, t, w);
      p.data[i] = orig - 1e-6;
      const double down = supervised_loss(p, t, w);
      p.data[i] = orig;
      EXPECT_NEAR(g.data[i], (up - down) / 2e-6, 1e-5 * std::max(1.0, std::fabs(g.data[i])));
    }
  }
}

TEST(SupervisedLoss, Errors) {
  nn::Tensor<double> p(1, 2, {2, 2, 2}, 0.5);
  std::vector<std::int32_t> short_t(7, 0), bad(8, 2);
  EXPECT_THROW(supervised_loss(p, short_t, {}), InvalidArgument);
  EXPECT_THROW(supervised_loss(p, bad, {}), InvalidArgument);
  EXPECT_THROW((LossWeights{0.0, 0.0}.validate()), ConfigError);
  EXPECT_THROW((LossWeights{-1.0, 1.0}.validate()), ConfigError);
}

TEST(ConsistencyLoss, DiagonalIsZeroForSquaredDenominator) {
  std::mt19937_64 rng(2);
  const std::vector<int> cls{0, 1, 2};
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_probs<double>(rng, 1, 3, {3, 3, 3});
    const std::vector<std::uint8_t> mask(27, 1);
    EXPECT_LT(consistency_dice_loss(p, p, mask, cls, 2, 1e-8), 1e-6);
  }
}

TEST(ConsistencyLoss, HandValues) {
  const std::vector<std::uint8_t> mask(8, 1);
  const std::vector<int> c1{1};
  nn::Tensor<double> half(1, 2, {2, 2, 2}, 0.5);
  EXPECT_NEAR(consistency_dice_loss(half, half, mask, c1, 1, 0.0), 0.5, 1e-12);
  nn::Tensor<double> one(1, 2, {2, 2, 2}, 1.0), zero(1, 2, {2, 2, 2}, 0.0);
  EXPECT_NEAR(consistency_dice_loss(one, zero, mask, c1, 2, 1e-8), 1.0, 1e-6);
  EXPECT_NEAR(consistency_dice_loss(one, zero, mask, c1, 1, 1e-8), 1.0, 1e-6);
}

TEST(ConsistencyLoss, MatchesDirectSummation) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_probs<double>(rng, 2, 4, {3, 3, 4});
    const auto b = random_probs<double>(rng, 2, 4, {3, 3, 4});
    const bool shared = trial % 2 == 0;
    const auto mask = random_mask(rng, shared ? a.voxels() : 2 * a.voxels());
    const std::vector<int> cls = trial % 3 == 0 ? std::vector<int>{1, 3} : std::vector<int>{1, 2, 3};
    const int d = 1 + trial % 2;
    const double got = consistency_dice_loss(a, b, mask, cls, d, 1e-8);
    const double want = oracle::consistency_loss(as_double(a), as_double(b), mask, 2, 4, a.voxels(), cls, d, 1e-8);
    EXPECT_NEAR(got, want, 1e-6);
  }
}

TEST(ConsistencyLoss, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = random_probs<double>(rng, 2, 3, {2, 3, 3});
    auto b = random_probs<double>(rng, 2, 3, {2, 3, 3});
    const auto mask = random_mask(rng, a.voxels());
    const std::vector<int> cls{1, 2};
    const int d = trial % 2 ? 1 : 2;
    nn::Tensor<double> ga, gb;
    consistency_dice_loss(a, b, mask, cls, d, 1e-8, &ga, &gb);
    for (auto [t, g] : {std::pair{&a, &ga}, std::pair{&b, &gb}}) {
      for (std::size_t i = 0; i < t->data.size(); ++i) {
        const double orig = t->data[i];
        t->data[i] = orig + 1e-6;
        const double up = consistency_dice_loss(a, b, mask, cls, d, 1e-8);
        t->data[i] = orig - 1e-6;
        const double down = consistency_dice_loss(a, b, mask, cls, d, 1e-8);
        t->data[i] = orig;
        const double fd = (up - down) / 2e-6;
        const double an = g->data[i];
        if (fd == 0.0 && an == 0.0) continue;
        EXPECT_LT(std::fabs(fd - an) / std::max(std::fabs(fd), std::fabs(an)), 1e-4);
      }
    }
  }
}

TEST(ConsistencyLoss, OutsideMaskIsIgnoredBitExactly) {
  std::mt19937_64 rng(5);
  auto a = random_probs<double>(rng, 1, 3, {4, 4, 4});
  auto b = random_probs<double>(rng, 1, 3, {4, 4, 4});
  const auto mask = random_mask(rng, a.voxels(), 0.5);
  const std::vector<int> cls{1, 2};
  nn::Tensor<double> ga, gb;
  const double before = consistency_dice_loss(a, b, mask, cls, 2, 1e-8, &ga, &gb);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < a.voxels(); ++i)
      if (!mask[i]) {
        EXPECT_EQ(ga.channel(0, c)[i], 0.0);
        EXPECT_EQ(gb.channel(0, c)[i], 0.0);
        a.channel(0, c)[i] = 0.123;
        b.channel(0, c)[i] = 0.987;
      }
  EXPECT_EQ(consistency_dice_loss(a, b, mask, cls, 2, 1e-8), before);
}

TEST(ConsistencyLoss, ClassesOutsideSubsetGetZeroGradient) {
  std::mt19937_64 rng(6);
  const auto a = random_probs<double>(rng, 2, 4, {3, 3, 3});
  const auto b = random_probs<double>(rng, 2, 4, {3, 3, 3});
  const std::vector<std::uint8_t> mask(a.voxels(), 1);
  const std::vector<int> cls{2};
  nn::Tensor<double> ga, gb;
  consistency_dice_loss(a, b, mask, cls, 2, 1e-8, &ga, &gb);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c : {0u, 1u, 3u})
      for (std::size_t i = 0; i < a.voxels(); ++i) {
        EXPECT_EQ(ga.channel(n, c)[i], 0.0);
        EXPECT_EQ(gb.channel(n, c)[i], 0.0);
      }
}

TEST(ConsistencyLoss, Errors) {
  nn::Tensor<double> a(1, 2, {2, 2, 2}, 0.5);
  const std::vector<std::uint8_t> empty(8, 0), full(8, 1), wrong(5, 1);
  const std::vector<int> cls{1}, bad_cls{2}, none;
  EXPECT_THROW(consistency_dice_loss(a, a, empty, cls, 2, 1e-8), DegenerateInput);
  EXPECT_THROW(consistency_dice_loss(a, a, wrong, cls, 2, 1e-8), InvalidArgument);
  EXPECT_THROW(consistency_dice_loss(a, a, full, bad_cls, 2, 1e-8), InvalidArgument);
  EXPECT_THROW(consistency_dice_loss(a, a, full, none, 2, 1e-8), InvalidArgument);
  EXPECT_THROW(consistency_dice_loss(a, a, full, cls, 3, 1e-8), InvalidArgument);
  EXPECT_THROW(consistency_dice_loss(a, nn::Tensor<double>(1, 2, {2, 2, 1}), full, cls, 2, 1e-8), InvalidArgument);
}

TEST(Entropy, UniformIsLogKAndGradientChecks) {
  nn::Tensor<double> u(1, 5, {2, 2, 2}, 0.2);
  EXPECT_NEAR(mean_entropy(u), std::log(5.0), 1e-12);
  std::mt19937_64 rng(7);
  auto p = random_probs<double>(rng, 2, 3, {2, 2, 2});
  nn::Tensor<double> g;
  mean_entropy(p, &g);
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const double orig = p.data[i];
    p.data[i] = orig + 1e-6;
    const double up = mean_entropy(p);
    p.data[i] = orig - 1e-6;
    const double down = mean_entropy(p);
    p.data[i] = orig;
    EXPECT_NEAR(g.data[i], (up - down) / 2e-6, 1e-6);
  }
}
