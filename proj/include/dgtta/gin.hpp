#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dgtta/volume.hpp"

namespace dgtta {

/// Global intensity non-linear augmentation settings.
struct GinConfig {
  int num_layers = 4;
  int hidden_channels = 2;
  int kernel_size = 3;
  double alpha_low = 0.0;   ///< blend weight alpha ~ Uniform(alpha_low, alpha_high)
  double alpha_high = 1.0;
  bool renormalize_output = true;  ///< rescale g(x) to the input's mean/std before blending
  std::uint64_t seed = 0;

  void validate() const;
};

/// Shallow convolutional network with freshly drawn weights. Kernels are
/// sampled from N(0, 2 / fan_in); layers are separated by leaky ReLU (0.01).
class RandomConvNet {
 public:
  static RandomConvNet sample(const GinConfig& cfg, std::size_t channels, std::mt19937_64& rng);

  Volume apply(const Volume& v) const;

 private:
  struct Layer {
    int in_channels = 0;
    int out_channels = 0;
    std::vector<float> weights;  // (out, in, k, k, k)
  };
  int kernel_size_ = 3;
  std::vector<Layer> layers_;
};

/// alpha * transformed + (1 - alpha) * original.
Volume gin_blend(const Volume& original, const Volume& transformed, double alpha);

/// Draws a new network, applies it, and blends with the input. The network is
/// drawn before alpha, so two calls that differ only in the alpha range share
/// the same network when given equal generator states.
Volume gin_augment(const Volume& v, const GinConfig& cfg, std::mt19937_64& rng);

}  // namespace dgtta
