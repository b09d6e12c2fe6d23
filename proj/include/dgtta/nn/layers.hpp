#pragma once

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgtta/error.hpp"
#include "dgtta/nn/tensor.hpp"

namespace dgtta::nn {

enum class NormKind { Instance, Batch };

/// Training: normalization uses the statistics of the current batch (and batch
/// norm updates its running estimates). Inference: batch norm uses the stored
/// running statistics. Instance norm behaves identically in both.
enum class Phase { Inference, Training };

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

inline constexpr double kLeakySlope = 0.01;

template <typename T>
void init_kaiming(Parameter<T>& p, double fan_in, std::mt19937_64& rng) {
  const double gain = std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope));
  std::normal_distribution<double> dist(0.0, gain / std::sqrt(fan_in));
  for (auto& w : p.value) w = static_cast<T>(dist(rng));
}

/// Same-padded 3D convolution with cubic kernel of size 1 or 3.
template <typename T>
class Conv3d {
 public:
  Conv3d() = default;
  Conv3d(const std::string& name, int in, int out, int kernel, std::mt19937_64& rng)
      : in_(in), out_(out), k_(kernel) {
    if (kernel != 1 && kernel != 3) throw InvalidArgument("Conv3d supports kernel 1 or 3");
    taps_ = kernel * kernel * kernel;
    weight.name = name + ".weight";
    bias.name = name + ".bias";
    weight.resize(static_cast<std::size_t>(out * in * taps_));
    bias.resize(static_cast<std::size_t>(out));
    init_kaiming(weight, static_cast<double>(in * taps_), rng);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (static_cast<int>(x.channels) != in_) throw InvalidArgument(weight.name + ": channel mismatch");
    input_ = x;
    const auto n = static_cast<Eigen::Index>(x.voxels());
    const auto rows = static_cast<Eigen::Index>(in_ * taps_);
    Tensor<T> y(x.batch, static_cast<std::size_t>(out_), x.shape);
    ConstMatMap<T> w(weight.value.data(), out_, rows);
    for (std::size_t b = 0; b < x.batch; ++b) {
      MatMap<T> ys(y.sample(b), out_, n);
      if (k_ == 1) {
        ys.noalias() = w * ConstMatMap<T>(x.sample(b), rows, n);
      } else {
        im2col(x, b);
        ys.noalias() = w * ConstMatMap<T>(col_.data(), rows, n);
      }
      for (int o = 0; o < out_; ++o) ys.row(o).array() += bias.value[static_cast<std::size_t>(o)];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, bool input_grad) {
    const auto n = static_cast<Eigen::Index>(gy.voxels());
    const auto rows = static_cast<Eigen::Index>(in_ * taps_);
    ConstMatMap<T> w(weight.value.data(), out_, rows);
    MatMap<T> dw(weight.grad.data(), out_, rows);
    Tensor<T> gx;
    if (input_grad) gx = Tensor<T>(input_.batch, input_.channels, input_.shape);
    for (std::size_t b = 0; b < gy.batch; ++b) {
      ConstMatMap<T> gs(gy.sample(b), out_, n);
      for (int o = 0; o < out_; ++o) bias.grad[static_cast<std::size_t>(o)] += gs.row(o).sum();
      if (k_ == 1) {
        ConstMatMap<T> xs(input_.sample(b), rows, n);
        dw.noalias() += gs * xs.transpose();
        if (input_grad) MatMap<T>(gx.sample(b), rows, n).noalias() = w.transpose() * gs;
      } else {
        im2col(input_, b);
        dw.noalias() += gs * ConstMatMap<T>(col_.data(), rows, n).transpose();
        if (input_grad) {
          col_.resize(static_cast<std::size_t>(rows * n));
          MatMap<T>(col_.data(), rows, n).noalias() = w.transpose() * gs;
          col2im(gx, b);
        }
      }
    }
    return gx;
  }

  Parameter<T> weight;
  Parameter<T> bias;

 private:
  // Row r = ci * 27 + (kz * 9 + ky * 3 + kx) holds the input shifted by (k - 1).
  void im2col(const Tensor<T>& x, std::size_t b) {
    const long nz = static_cast<long>(x.shape[0]), ny = static_cast<long>(x.shape[1]),
               nx = static_cast<long>(x.shape[2]);
    const std::size_t n = x.voxels();
    col_.resize(static_cast<std::size_t>(in_ * taps_) * n);
    T* dst = col_.data();
    for (int ci = 0; ci < in_; ++ci) {
      const T* src = x.channel(b, static_cast<std::size_t>(ci));
      for (int kz = -1; kz <= 1; ++kz)
        for (int ky = -1; ky <= 1; ++ky)
          for (int kx = -1; kx <= 1; ++kx) {
            for (long z = 0; z < nz; ++z) {
              const long zz = z + kz;
              for (long y = 0; y < ny; ++y) {
                const long yy = y + ky;
                T* row = dst + (z * ny + y) * nx;
                if (zz < 0 || zz >= nz || yy < 0 || yy >= ny) {
                  std::fill(row, row + nx, T(0));
                  continue;
                }
                const T* s = src + (zz * ny + yy) * nx;
                if (kx == 0) {
                  std::copy(s, s + nx, row);
                } else if (kx < 0) {
                  row[0] = T(0);
                  std::copy(s, s + nx - 1, row + 1);
                } else {
                  std::copy(s + 1, s + nx, row);
                  row[nx - 1] = T(0);
                }
              }
            }
            dst += n;
          }
    }
  }

  void col2im(Tensor<T>& gx, std::size_t b) const {
    const long nz = static_cast<long>(gx.shape[0]), ny = static_cast<long>(gx.shape[1]),
               nx = static_cast<long>(gx.shape[2]);
    const std::size_t n = gx.voxels();
    const T* src = col_.data();
    for (int ci = 0; ci < in_; ++ci) {
      T* dst = gx.channel(b, static_cast<std::size_t>(ci));
      for (int kz = -1; kz <= 1; ++kz)
        for (int ky = -1; ky <= 1; ++ky)
          for (int kx = -1; kx <= 1; ++kx) {
            for (long z = 0; z < nz; ++z) {
              const long zz = z + kz;
              if (zz < 0 || zz >= nz) continue;
              for (long y = 0; y < ny; ++y) {
                const long yy = y + ky;
                if (yy < 0 || yy >= ny) continue;
                const T* row = src + (z * ny + y) * nx;
                T* d = dst + (zz * ny + yy) * nx;
                const long x0 = std::max(0L, -static_cast<long>(kx));
                const long x1 = std::min(nx, nx - kx);
                for (long xx = x0; xx < x1; ++xx) d[xx + kx] += row[xx];
              }
            }
            src += n;
          }
    }
  }

  int in_ = 0, out_ = 0, k_ = 3, taps_ = 27;
  Tensor<T> input_;
  AlignedVector<T> col_;
};

/// 2x2x2 convolution with stride 2 (learned downsampling).
template <typename T>
class DownConv {
 public:
  DownConv() = default;
  DownConv(const std::string& name, int in, int out, std::mt19937_64& rng) : in_(in), out_(out) {
    weight.name = name + ".weight";
    bias.name = name + ".bias";
    weight.resize(static_cast<std::size_t>(out * in * 8));
    bias.resize(static_cast<std::size_t>(out));
    init_kaiming(weight, static_cast<double>(in * 8), rng);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    for (auto d : x.shape) {
      if (d % 2 != 0) throw InvalidArgument(weight.name + ": spatial extent must be even");
    }
    input_shape_ = x.shape;
    const Shape3 os{x.shape[0] / 2, x.shape[1] / 2, x.shape[2] / 2};
    const auto n = static_cast<Eigen::Index>(voxel_count(os));
    Tensor<T> y(x.batch, static_cast<std::size_t>(out_), os);
    cols_.assign(x.batch, {});
    ConstMatMap<T> w(weight.value.data(), out_, in_ * 8);
    for (std::size_t b = 0; b < x.batch; ++b) {
      auto& col = cols_[b];
      col.resize(static_cast<std::size_t>(in_ * 8) * static_cast<std::size_t>(n));
      for (int ci = 0; ci < in_; ++ci) {
        const T* src = x.channel(b, static_cast<std::size_t>(ci));
        for (int t = 0; t < 8; ++t) {
          const std::size_t a = t >> 2, bb = (t >> 1) & 1, c = t & 1;
          T* row = col.data() + static_cast<std::size_t>(ci * 8 + t) * static_cast<std::size_t>(n);
          std::size_t o = 0;
          for (std::size_t z = 0; z < os[0]; ++z)
            for (std::size_t yy = 0; yy < os[1]; ++yy)
              for (std::size_t xx = 0; xx < os[2]; ++xx, ++o)
                row[o] = src[((2 * z + a) * x.shape[1] + 2 * yy + bb) * x.shape[2] + 2 * xx + c];
        }
      }
      MatMap<T> ys(y.sample(b), out_, n);
      ys.noalias() = w * ConstMatMap<T>(col.data(), in_ * 8, n);
      for (int o = 0; o < out_; ++o) ys.row(o).array() += bias.value[static_cast<std::size_t>(o)];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const auto n = static_cast<Eigen::Index>(gy.voxels());
    ConstMatMap<T> w(weight.value.data(), out_, in_ * 8);
    MatMap<T> dw(weight.grad.data(), out_, in_ * 8);
    Tensor<T> gx(gy.batch, static_cast<std::size_t>(in_), input_shape_);
    AlignedVector<T> dcol(static_cast<std::size_t>(in_ * 8) * static_cast<std::size_t>(n));
    const Shape3& os = gy.shape;
    for (std::size_t b = 0; b < gy.batch; ++b) {
      ConstMatMap<T> gs(gy.sample(b), out_, n);
      for (int o = 0; o < out_; ++o) bias.grad[static_cast<std::size_t>(o)] += gs.row(o).sum();
      dw.noalias() += gs * ConstMatMap<T>(cols_[b].data(), in_ * 8, n).transpose();
      MatMap<T>(dcol.data(), in_ * 8, n).noalias() = w.transpose() * gs;
      for (int ci = 0; ci < in_; ++ci) {
        T* dst = gx.channel(b, static_cast<std::size_t>(ci));
        for (int t = 0; t < 8; ++t) {
          const std::size_t a = t >> 2, bb = (t >> 1) & 1, c = t & 1;
          const T* row = dcol.data() + static_cast<std::size_t>(ci * 8 + t) * static_cast<std::size_t>(n);
          std::size_t o = 0;
          for (std::size_t z = 0; z < os[0]; ++z)
            for (std::size_t yy = 0; yy < os[1]; ++yy)
              for (std::size_t xx = 0; xx < os[2]; ++xx, ++o)
                dst[((2 * z + a) * input_shape_[1] + 2 * yy + bb) * input_shape_[2] + 2 * xx + c] = row[o];
        }
      }
    }
    return gx;
  }

  Parameter<T> weight;
  Parameter<T> bias;

 private:
  int in_ = 0, out_ = 0;
  Shape3 input_shape_{};
  std::vector<AlignedVector<T>> cols_;
};

/// 2x2x2 transposed convolution with stride 2 (learned upsampling).
template <typename T>
class UpConv {
 public:
  UpConv() = default;
  UpConv(const std::string& name, int in, int out, std::mt19937_64& rng) : in_(in), out_(out) {
    weight.name = name + ".weight";
    bias.name = name + ".bias";
    weight.resize(static_cast<std::size_t>(out * 8 * in));
    bias.resize(static_cast<std::size_t>(out));
    init_kaiming(weight, static_cast<double>(in), rng);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    input_ = x;
    const auto n = static_cast<Eigen::Index>(x.voxels());
    const Shape3 os{x.shape[0] * 2, x.shape[1] * 2, x.shape[2] * 2};
    Tensor<T> y(x.batch, static_cast<std::size_t>(out_), os);
    ConstMatMap<T> w(weight.value.data(), out_ * 8, in_);
    tmp_.resize(static_cast<std::size_t>(out_ * 8) * static_cast<std::size_t>(n));
    for (std::size_t b = 0; b < x.batch; ++b) {
      MatMap<T>(tmp_.data(), out_ * 8, n).noalias() = w * ConstMatMap<T>(x.sample(b), in_, n);
      for (int co = 0; co < out_; ++co) {
        T* dst = y.channel(b, static_cast<std::size_t>(co));
        const T bv = bias.value[static_cast<std::size_t>(co)];
        for (int t = 0; t < 8; ++t) {
          const std::size_t a = t >> 2, bb = (t >> 1) & 1, c = t & 1;
          const T* row = tmp_.data() + static_cast<std::size_t>(co * 8 + t) * static_cast<std::size_t>(n);
          std::size_t o = 0;
          for (std::size_t z = 0; z < x.shape[0]; ++z)
            for (std::size_t yy = 0; yy < x.shape[1]; ++yy)
              for (std::size_t xx = 0; xx < x.shape[2]; ++xx, ++o)
                dst[((2 * z + a) * os[1] + 2 * yy + bb) * os[2] + 2 * xx + c] = row[o] + bv;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const Shape3& is = input_.shape;
    const auto n = static_cast<Eigen::Index>(input_.voxels());
    ConstMatMap<T> w(weight.value.data(), out_ * 8, in_);
    MatMap<T> dw(weight.grad.data(), out_ * 8, in_);
    Tensor<T> gx(gy.batch, static_cast<std::size_t>(in_), is);
    tmp_.resize(static_cast<std::size_t>(out_ * 8) * static_cast<std::size_t>(n));
    for (std::size_t b = 0; b < gy.batch; ++b) {
      for (int co = 0; co < out_; ++co) {
        const T* src = gy.channel(b, static_cast<std::size_t>(co));
        T acc = T(0);
        for (int t = 0; t < 8; ++t) {
          const std::size_t a = t >> 2, bb = (t >> 1) & 1, c = t & 1;
          T* row = tmp_.data() + static_cast<std::size_t>(co * 8 + t) * static_cast<std::size_t>(n);
          std::size_t o = 0;
          for (std::size_t z = 0; z < is[0]; ++z)
            for (std::size_t yy = 0; yy < is[1]; ++yy)
              for (std::size_t xx = 0; xx < is[2]; ++xx, ++o) {
                row[o] = src[((2 * z + a) * gy.shape[1] + 2 * yy + bb) * gy.shape[2] + 2 * xx + c];
                acc += row[o];
              }
        }
        bias.grad[static_cast<std::size_t>(co)] += acc;
      }
      ConstMatMap<T> g(tmp_.data(), out_ * 8, n);
      dw.noalias() += g * ConstMatMap<T>(input_.sample(b), in_, n).transpose();
      MatMap<T>(gx.sample(b), in_, n).noalias() = w.transpose() * g;
    }
    return gx;
  }

  Parameter<T> weight;
  Parameter<T> bias;

 private:
  int in_ = 0, out_ = 0;
  Tensor<T> input_;
  AlignedVector<T> tmp_;
};

/// Instance or batch normalization with optional per-channel affine transform.
template <typename T>
class Norm {
 public:
  Norm() = default;
  Norm(const std::string& name, NormKind kind, int channels, bool affine)
      : kind_(kind), channels_(channels), affine_(affine) {
    gamma.name = name + ".gamma";
    beta.name = name + ".beta";
    gamma.is_norm = beta.is_norm = true;
    if (affine_) {
      gamma.resize(static_cast<std::size_t>(channels));
      beta.resize(static_cast<std::size_t>(channels));
      std::fill(gamma.value.begin(), gamma.value.end(), T(1));
    }
    running_mean.assign(static_cast<std::size_t>(channels), T(0));
    running_var.assign(static_cast<std::size_t>(channels), T(1));
  }

  NormKind kind() const { return kind_; }
  bool affine() const { return affine_; }

  Tensor<T> forward(const Tensor<T>& x, Phase phase) {
    const std::size_t nb = x.batch, nc = x.channels, nv = x.voxels();
    xhat_ = Tensor<T>(nb, nc, x.shape);
    Tensor<T> y(nb, nc, x.shape);
    batch_stats_ = kind_ == NormKind::Instance || phase == Phase::Training;
    const std::size_t groups = kind_ == NormKind::Instance ? nb * nc : nc;
    inv_std_.assign(groups, T(0));
    std::vector<double> mean(groups, 0.0), var(groups, 0.0);
    auto group_of = [&](std::size_t b, std::size_t c) { return kind_ == NormKind::Instance ? b * nc + c : c; };
    if (batch_stats_) {
      const double count = static_cast<double>(kind_ == NormKind::Instance ? nv : nv * nb);
      for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t c = 0; c < nc; ++c) {
          const T* src = x.channel(b, c);
          double s = 0.0;
          for (std::size_t i = 0; i < nv; ++i) s += static_cast<double>(src[i]);
          mean[group_of(b, c)] += s / count;
        }
      for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t c = 0; c < nc; ++c) {
          const T* src = x.channel(b, c);
          const double m = mean[group_of(b, c)];
          double s = 0.0;
          for (std::size_t i = 0; i < nv; ++i) {
            const double d = static_cast<double>(src[i]) - m;
            s += d * d;
          }
          var[group_of(b, c)] += s / count;
        }
      if (kind_ == NormKind::Batch && phase == Phase::Training) {
        const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
        for (std::size_t c = 0; c < nc; ++c) {
          running_mean[c] = static_cast<T>((1.0 - momentum) * running_mean[c] + momentum * mean[c]);
          running_var[c] = static_cast<T>((1.0 - momentum) * running_var[c] + momentum * var[c] * unbias);
        }
      }
    } else {
      for (std::size_t c = 0; c < nc; ++c) {
        mean[c] = static_cast<double>(running_mean[c]);
        var[c] = static_cast<double>(running_var[c]);
      }
    }
    for (std::size_t g = 0; g < groups; ++g) inv_std_[g] = static_cast<T>(1.0 / std::sqrt(var[g] + eps));
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t c = 0; c < nc; ++c) {
        const std::size_t g = group_of(b, c);
        const T m = static_cast<T>(mean[g]);
        const T is = inv_std_[g];
        const T ga = affine_ ? gamma.value[c] : T(1);
        const T be = affine_ ? beta.value[c] : T(0);
        const T* src = x.channel(b, c);
        T* xh = xhat_.channel(b, c);
        T* dst = y.channel(b, c);
        for (std::size_t i = 0; i < nv; ++i) {
          xh[i] = (src[i] - m) * is;
          dst[i] = ga * xh[i] + be;
        }
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const std::size_t nb = gy.batch, nc = gy.channels, nv = gy.voxels();
    Tensor<T> gx(nb, nc, gy.shape);
    const std::size_t groups = kind_ == NormKind::Instance ? nb * nc : nc;
    auto group_of = [&](std::size_t b, std::size_t c) { return kind_ == NormKind::Instance ? b * nc + c : c; };
    std::vector<double> sum_g(groups, 0.0), sum_gx(groups, 0.0);
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t c = 0; c < nc; ++c) {
        const T* g = gy.channel(b, c);
        const T* xh = xhat_.channel(b, c);
        double sg = 0.0, sgx = 0.0;
        for (std::size_t i = 0; i < nv; ++i) {
          sg += static_cast<double>(g[i]);
          sgx += static_cast<double>(g[i]) * static_cast<double>(xh[i]);
        }
        if (affine_) {
          gamma.grad[c] += static_cast<T>(sgx);
          beta.grad[c] += static_cast<T>(sg);
        }
        sum_g[group_of(b, c)] += sg;
        sum_gx[group_of(b, c)] += sgx;
      }
    const double count = static_cast<double>(kind_ == NormKind::Instance ? nv : nv * nb);
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t c = 0; c < nc; ++c) {
        const std::size_t grp = group_of(b, c);
        const T ga = affine_ ? gamma.value[c] : T(1);
        const T is = inv_std_[grp];
        const T* g = gy.channel(b, c);
        const T* xh = xhat_.channel(b, c);
        T* dst = gx.channel(b, c);
        if (batch_stats_) {
          const T mg = static_cast<T>(sum_g[grp] / count);
          const T mgx = static_cast<T>(sum_gx[grp] / count);
          for (std::size_t i = 0; i < nv; ++i) dst[i] = ga * is * (g[i] - mg - xh[i] * mgx);
        } else {
          for (std::size_t i = 0; i < nv; ++i) dst[i] = ga * is * g[i];
        }
      }
    return gx;
  }

  Parameter<T> gamma;
  Parameter<T> beta;
  AlignedVector<T> running_mean;
  AlignedVector<T> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

 private:
  NormKind kind_ = NormKind::Instance;
  int channels_ = 0;
  bool affine_ = true;
  bool batch_stats_ = true;
  Tensor<T> xhat_;
  AlignedVector<T> inv_std_;
};

template <typename T>
void leaky_relu_inplace(Tensor<T>& t) {
  for (auto& v : t.data) v = v > T(0) ? v : static_cast<T>(kLeakySlope) * v;
}

/// Uses the activation output: y > 0 exactly when the input was positive.
template <typename T>
void leaky_relu_backward_inplace(Tensor<T>& g, const Tensor<T>& y) {
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    if (!(y.data[i] > T(0))) g.data[i] *= static_cast<T>(kLeakySlope);
  }
}

/// op -> norm -> leaky ReLU.
template <typename T, typename Op>
struct OpNormAct {
  Op op;
  Norm<T> norm;
  Tensor<T> out;

  Tensor<T> forward(const Tensor<T>& x, Phase phase) {
    Tensor<T> h = norm.forward(op.forward(x), phase);
    leaky_relu_inplace(h);
    out = h;
    return h;
  }

  Tensor<T> backward(Tensor<T> g, bool input_grad = true) {
    leaky_relu_backward_inplace(g, out);
    g = norm.backward(g);
    if constexpr (std::is_same_v<Op, Conv3d<T>>) {
      return op.backward(g, input_grad);
    } else {
      return op.backward(g);
    }
  }
};

/// Softmax over the channel axis.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits) {
  Tensor<T> p(logits.batch, logits.channels, logits.shape);
  const std::size_t nv = logits.voxels(), nc = logits.channels;
  for (std::size_t b = 0; b < logits.batch; ++b)
    for (std::size_t i = 0; i < nv; ++i) {
      T mx = logits.channel(b, 0)[i];
      for (std::size_t c = 1; c < nc; ++c) mx = std::max(mx, logits.channel(b, c)[i]);
      T sum = T(0);
      for (std::size_t c = 0; c < nc; ++c) {
        const T e = std::exp(logits.channel(b, c)[i] - mx);
        p.channel(b, c)[i] = e;
        sum += e;
      }
      for (std::size_t c = 0; c < nc; ++c) p.channel(b, c)[i] /= sum;
    }
  return p;
}

/// dL/dlogit_c = p_c (g_c - sum_k p_k g_k).
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& grad_probs, const Tensor<T>& probs) {
  Tensor<T> gl(probs.batch, probs.channels, probs.shape);
  const std::size_t nv = probs.voxels(), nc = probs.channels;
  for (std::size_t b = 0; b < probs.batch; ++b)
    for (std::size_t i = 0; i < nv; ++i) {
      T dot = T(0);
      for (std::size_t c = 0; c < nc; ++c) dot += probs.channel(b, c)[i] * grad_probs.channel(b, c)[i];
      for (std::size_t c = 0; c < nc; ++c) {
        gl.channel(b, c)[i] = probs.channel(b, c)[i] * (grad_probs.channel(b, c)[i] - dot);
      }
    }
  return gl;
}

}  // namespace dgtta::nn
