#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dgtta/volume.hpp"

namespace dgtta::nn {

/// Storage for every buffer Eigen reads. A fixed base alignment keeps the
/// vectorized reductions in the same summation order from run to run.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

/// Batch of channel-first 3D fields, layout (n, c, z, y, x).
template <typename T>
struct Tensor {
  std::size_t batch = 0;
  std::size_t channels = 0;
  Shape3 shape{0, 0, 0};
  AlignedVector<T> data;

  Tensor() = default;
  Tensor(std::size_t n, std::size_t c, Shape3 s, T fill = T(0))
      : batch(n), channels(c), shape(s), data(n * c * voxel_count(s), fill) {}

  std::size_t voxels() const { return voxel_count(shape); }
  std::size_t sample_size() const { return channels * voxels(); }

  T* sample(std::size_t n) { return data.data() + n * sample_size(); }
  const T* sample(std::size_t n) const { return data.data() + n * sample_size(); }
  T* channel(std::size_t n, std::size_t c) { return sample(n) + c * voxels(); }
  const T* channel(std::size_t n, std::size_t c) const { return sample(n) + c * voxels(); }

  bool same_layout(const Tensor& o) const {
    return batch == o.batch && channels == o.channels && shape == o.shape;
  }
};

/// Trainable tensor with its gradient accumulator and group tags.
template <typename T>
struct Parameter {
  std::string name;
  AlignedVector<T> value;
  AlignedVector<T> grad;
  bool is_norm = false;
  bool in_encoder = false;

  void resize(std::size_t n) {
    value.assign(n, T(0));
    grad.assign(n, T(0));
  }
  std::size_t size() const { return value.size(); }
};

/// Non-trainable state persisted with a model (normalization running statistics).
template <typename T>
struct Buffer {
  std::string name;
  AlignedVector<T>* values = nullptr;
};

}  // namespace dgtta::nn
