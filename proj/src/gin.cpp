#include "dgtta/gin.hpp"

#include <cmath>

#include "dgtta/error.hpp"

namespace dgtta {

void GinConfig::validate() const {
  if (num_layers < 1) throw InvalidArgument("gin num_layers must be >= 1");
  if (hidden_channels < 1) throw InvalidArgument("gin hidden_channels must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw InvalidArgument("gin kernel_size must be odd");
  if (!(0.0 <= alpha_low && alpha_low <= alpha_high && alpha_high <= 1.0)) {
    throw InvalidArgument("gin alpha range needs 0 <= low <= high <= 1");
  }
}

RandomConvNet RandomConvNet::sample(const GinConfig& cfg, std::size_t channels, std::mt19937_64& rng) {
  cfg.validate();
  RandomConvNet net;
  net.kernel_size_ = cfg.kernel_size;
  const int k3 = cfg.kernel_size * cfg.kernel_size * cfg.kernel_size;
  for (int l = 0; l < cfg.num_layers; ++l) {
    Layer layer;
    layer.in_channels = l == 0 ? static_cast<int>(channels) : cfg.hidden_channels;
    layer.out_channels = l == cfg.num_layers - 1 ? static_cast<int>(channels) : cfg.hidden_channels;
    const double fan_in = static_cast<double>(layer.in_channels * k3);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    layer.weights.resize(static_cast<std::size_t>(layer.out_channels * layer.in_channels * k3));
    for (auto& w : layer.weights) w = static_cast<float>(dist(rng));
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

Volume RandomConvNet::apply(const Volume& v) const {
  const Shape3 n = v.shape();
  const long nz = static_cast<long>(n[0]), ny = static_cast<long>(n[1]), nx = static_cast<long>(n[2]);
  const int k = kernel_size_;
  const int r = k / 2;
  std::vector<float> cur(v.data().begin(), v.data().end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    std::vector<float> next(static_cast<std::size_t>(layer.out_channels) * voxel_count(n), 0.0f);
    for (int co = 0; co < layer.out_channels; ++co) {
      float* out = next.data() + static_cast<std::size_t>(co) * voxel_count(n);
      for (int ci = 0; ci < layer.in_channels; ++ci) {
        const float* in = cur.data() + static_cast<std::size_t>(ci) * voxel_count(n);
        const float* w = layer.weights.data() + static_cast<std::size_t>((co * layer.in_channels + ci) * k * k * k);
        for (int dz = -r; dz <= r; ++dz)
          for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
              const float wk = w[((dz + r) * k + (dy + r)) * k + (dx + r)];
              const long x0 = std::max(0L, -static_cast<long>(dx));
              const long x1 = std::min(nx, nx - dx);
              for (long z = std::max(0L, -static_cast<long>(dz)); z < std::min(nz, nz - dz); ++z)
                for (long y = std::max(0L, -static_cast<long>(dy)); y < std::min(ny, ny - dy); ++y) {
                  float* orow = out + (z * ny + y) * nx;
                  const float* irow = in + ((z + dz) * ny + (y + dy)) * nx + dx;
                  for (long x = x0; x < x1; ++x) orow[x] += wk * irow[x];
                }
            }
      }
    }
    if (l + 1 < layers_.size()) {
      for (auto& f : next) f = f > 0.0f ? f : 0.01f * f;
    }
    cur = std::move(next);
  }
  return Volume(v.channels(), n, v.spacing(), std::move(cur));
}

Volume gin_blend(const Volume& original, const Volume& transformed, double alpha) {
  if (original.shape() != transformed.shape() || original.channels() != transformed.channels()) {
    throw InvalidArgument("gin_blend operands differ in shape");
  }
  Volume out = original;
  auto o = out.data();
  auto t = transformed.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = static_cast<float>(alpha * t[i] + (1.0 - alpha) * o[i]);
  }
  return out;
}

namespace {

void match_moments(Volume& target, const Volume& reference) {
  auto moments = [](std::span<const float> d) {
    double mean = 0.0;
    for (float f : d) mean += f;
    mean /= static_cast<double>(d.size());
    double var = 0.0;
    for (float f : d) var += (f - mean) * (f - mean);
    return std::pair{mean, std::sqrt(var / static_cast<double>(d.size()))};
  };
  for (std::size_t c = 0; c < target.channels(); ++c) {
    const auto [tm, ts] = moments(target.channel(c));
    const auto [rm, rs] = moments(reference.channel(c));
    for (auto& f : target.channel(c)) {
      f = static_cast<float>(ts > 0.0 ? (f - tm) / ts * rs + rm : rm);
    }
  }
}

}  // namespace

Volume gin_augment(const Volume& v, const GinConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const auto net = RandomConvNet::sample(cfg, v.channels(), rng);
  Volume g = net.apply(v);
  if (cfg.renormalize_output) match_moments(g, v);
  std::uniform_real_distribution<double> alpha_dist(cfg.alpha_low, cfg.alpha_high);
  const double alpha = cfg.alpha_low == cfg.alpha_high ? (rng(), cfg.alpha_low) : alpha_dist(rng);
  Volume out = gin_blend(v, g, alpha);
  for (auto& f : out.data()) {
    if (!std::isfinite(f)) f = 0.0f;
  }
  return out;
}

}  // namespace dgtta
