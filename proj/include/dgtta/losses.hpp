#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dgtta/error.hpp"
#include "dgtta/nn/tensor.hpp"

namespace dgtta {

struct LossWeights {
  double ce = 1.0;
  double dice = 1.0;

  void validate() const {
    if (ce < 0.0 || dice < 0.0 || !(ce + dice > 0.0)) {
      throw ConfigError("loss weights must be non-negative and not both zero");
    }
  }
};

inline constexpr double kSupervisedDiceEps = 1e-5;

/// ce * mean voxel cross-entropy + dice * (1 - mean soft Dice over the batch and
/// the foreground classes 1..C-1). `target` holds batch * voxels labels. When
/// `grad` is given it receives dLoss/dprobs.
template <typename T>
double supervised_loss(const nn::Tensor<T>& probs, std::span<const std::int32_t> target, const LossWeights& w,
                       nn::Tensor<T>* grad = nullptr, double eps = kSupervisedDiceEps) {
  const std::size_t nb = probs.batch, nc = probs.channels, nv = probs.voxels();
  if (target.size() != nb * nv) throw InvalidArgument("target size does not match the prediction");
  if (nc < 2) throw InvalidArgument("supervised loss needs at least two classes");
  for (auto t : target) {
    if (t < 0 || static_cast<std::size_t>(t) >= nc) throw InvalidArgument("target label outside [0, num_classes)");
  }
  if (grad) *grad = nn::Tensor<T>(nb, nc, probs.shape);
  constexpr double kFloor = 1e-12;
  const double n_total = static_cast<double>(nb * nv);
  double ce = 0.0;
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t i = 0; i < nv; ++i) {
      const auto c = static_cast<std::size_t>(target[b * nv + i]);
      const double p = static_cast<double>(probs.channel(b, c)[i]);
      ce -= std::log(std::max(p, kFloor));
      if (grad && p > kFloor) grad->channel(b, c)[i] += static_cast<T>(-w.ce / (p * n_total));
    }
  ce /= n_total;

  const double terms = static_cast<double>(nb * (nc - 1));
  double dice_sum = 0.0;
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t c = 1; c < nc; ++c) {
      const T* p = probs.channel(b, c);
      const std::int32_t* t = target.data() + b * nv;
      double inter = 0.0, total = 0.0;
      for (std::size_t i = 0; i < nv; ++i) {
        const double y = t[i] == static_cast<std::int32_t>(c) ? 1.0 : 0.0;
        inter += static_cast<double>(p[i]) * y;
        total += static_cast<double>(p[i]) + y;
      }
      const double num = 2.0 * inter + eps, den = total + eps;
      dice_sum += num / den;
      if (grad) {
        T* g = grad->channel(b, c);
        for (std::size_t i = 0; i < nv; ++i) {
          const double y = t[i] == static_cast<std::int32_t>(c) ? 1.0 : 0.0;
          g[i] += static_cast<T>(-w.dice * (2.0 * y * den - num) / (den * den) / terms);
        }
      }
    }
  const double dice_loss = 1.0 - dice_sum / terms;
  return w.ce * ce + w.dice * dice_loss;
}

/// 1 - mean over batch and classes in `classes` of
///   (e + sum_m 2 a b) / (e + sum_m a^d + b^d)
/// with sums over voxels where the mask is set. `mask` has either one entry per
/// voxel (shared by the batch) or batch * voxels entries. Gradients w.r.t. a and
/// b are written when requested; unmasked voxels and classes outside the subset
/// receive exactly zero.
template <typename T>
double consistency_dice_loss(const nn::Tensor<T>& a, const nn::Tensor<T>& b, std::span<const std::uint8_t> mask,
                             std::span<const int> classes, int d, double e, nn::Tensor<T>* grad_a = nullptr,
                             nn::Tensor<T>* grad_b = nullptr) {
  if (!a.same_layout(b)) throw InvalidArgument("prediction layouts differ");
  if (d != 1 && d != 2) throw InvalidArgument("loss exponent must be 1 or 2");
  if (classes.empty()) throw InvalidArgument("class subset is empty");
  const std::size_t nb = a.batch, nv = a.voxels();
  const bool shared = mask.size() == nv;
  if (!shared && mask.size() != nb * nv) throw InvalidArgument("mask size does not match the prediction");
  std::size_t active = 0;
  for (auto m : mask) active += m != 0;
  if (active == 0) throw DegenerateInput("consistency mask is empty: no voxel to supervise");
  for (int c : classes) {
    if (c < 0 || static_cast<std::size_t>(c) >= a.channels) throw InvalidArgument("class index out of range");
  }
  if (grad_a) *grad_a = nn::Tensor<T>(a.batch, a.channels, a.shape);
  if (grad_b) *grad_b = nn::Tensor<T>(b.batch, b.channels, b.shape);
  const double terms = static_cast<double>(nb * classes.size());
  double ratio_sum = 0.0;
  for (std::size_t n = 0; n < nb; ++n) {
    const std::uint8_t* m = mask.data() + (shared ? 0 : n * nv);
    for (int c : classes) {
      const T* pa = a.channel(n, static_cast<std::size_t>(c));
      const T* pb = b.channel(n, static_cast<std::size_t>(c));
      double num = e, den = e;
      for (std::size_t i = 0; i < nv; ++i) {
        if (!m[i]) continue;
        const double x = static_cast<double>(pa[i]), y = static_cast<double>(pb[i]);
        num += 2.0 * x * y;
        den += d == 2 ? x * x + y * y : x + y;
      }
      ratio_sum += num / den;
      if (!grad_a && !grad_b) continue;
      const double scale = -1.0 / (terms * den * den);
      T* ga = grad_a ? grad_a->channel(n, static_cast<std::size_t>(c)) : nullptr;
      T* gb = grad_b ? grad_b->channel(n, static_cast<std::size_t>(c)) : nullptr;
      for (std::size_t i = 0; i < nv; ++i) {
        if (!m[i]) continue;
        const double x = static_cast<double>(pa[i]), y = static_cast<double>(pb[i]);
        if (ga) ga[i] = static_cast<T>(scale * (2.0 * y * den - num * (d == 2 ? 2.0 * x : 1.0)));
        if (gb) gb[i] = static_cast<T>(scale * (2.0 * x * den - num * (d == 2 ? 2.0 * y : 1.0)));
      }
    }
  }
  return 1.0 - ratio_sum / terms;
}

/// Mean over batch and voxels of -sum_c p log p; gradient w.r.t. probs on request.
template <typename T>
double mean_entropy(const nn::Tensor<T>& probs, nn::Tensor<T>* grad = nullptr) {
  const std::size_t nb = probs.batch, nc = probs.channels, nv = probs.voxels();
  const double n_total = static_cast<double>(nb * nv);
  if (grad) *grad = nn::Tensor<T>(nb, nc, probs.shape);
  double h = 0.0;
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t c = 0; c < nc; ++c) {
      const T* p = probs.channel(b, c);
      T* g = grad ? grad->channel(b, c) : nullptr;
      for (std::size_t i = 0; i < nv; ++i) {
        const double x = static_cast<double>(p[i]);
        if (x > 0.0) {
          h -= x * std::log(x);
          if (g) g[i] = static_cast<T>(-(std::log(x) + 1.0) / n_total);
        }
      }
    }
  return h / n_total;
}

}  // namespace dgtta
