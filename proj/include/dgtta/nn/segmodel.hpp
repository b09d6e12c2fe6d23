#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dgtta/nn/layers.hpp"

namespace dgtta::nn {

enum class ParamGroup { Norm, Encoder, Decoder, All };

ParamGroup parse_param_group(const std::string& name);
std::string to_string(ParamGroup g);
NormKind parse_norm_kind(const std::string& name);
std::string to_string(NormKind k);

struct SegModelConfig {
  int in_channels = 1;
  int num_classes = 2;
  int base_width = 16;
  int depth = 4;        ///< encoder stages including the bottleneck
  int max_width = 320;
  NormKind norm = NormKind::Instance;
  bool norm_affine = true;
  std::uint64_t seed = 0;

  void validate() const;
  int width(int stage) const;
  /// Spatial extents fed to forward() must be multiples of this.
  std::size_t divisor() const { return std::size_t{1} << (depth - 1); }
};

/// Compact 3D U-Net. Encoder stage 0 holds two 3x3x3 conv blocks; every later
/// stage a strided 2x2x2 conv block followed by one 3x3x3 conv block. Decoder
/// stages upsample with a 2x2x2 transposed conv, concatenate the skip and apply
/// two conv blocks. A 1x1x1 conv produces class logits and forward() returns
/// their channel softmax. The bottleneck belongs to the encoder group.
template <typename T>
class SegModel {
 public:
  explicit SegModel(const SegModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed);
    const int depth = cfg_.depth;
    encoder_.resize(static_cast<std::size_t>(depth));
    for (int s = 0; s < depth; ++s) {
      auto& st = encoder_[static_cast<std::size_t>(s)];
      const int w = cfg_.width(s);
      const std::string p = "enc" + std::to_string(s);
      if (s == 0) {
        st.blocks.push_back(make_conv_block(p + ".conv0", cfg_.in_channels, w, rng));
      } else {
        st.down.op = DownConv<T>(p + ".down", cfg_.width(s - 1), w, rng);
        st.down.norm = Norm<T>(p + ".down.norm", cfg_.norm, w, cfg_.norm_affine);
      }
      st.blocks.push_back(make_conv_block(p + ".conv1", w, w, rng));
    }
    decoder_.resize(static_cast<std::size_t>(depth - 1));
    for (int s = depth - 2; s >= 0; --s) {
      auto& st = decoder_[static_cast<std::size_t>(s)];
      const int w = cfg_.width(s);
      const std::string p = "dec" + std::to_string(s);
      st.up = UpConv<T>(p + ".up", cfg_.width(s + 1), w, rng);
      st.blocks.push_back(make_conv_block(p + ".conv0", 2 * w, w, rng));
      st.blocks.push_back(make_conv_block(p + ".conv1", w, w, rng));
    }
    head_ = Conv3d<T>("head", cfg_.width(0), cfg_.num_classes, 1, rng);
    for (auto* prm : parameters()) prm->in_encoder = prm->name.rfind("enc", 0) == 0;
  }

  const SegModelConfig& config() const { return cfg_; }

  /// Returns per-voxel class probabilities (batch, num_classes, shape).
  Tensor<T> forward(const Tensor<T>& x, Phase phase) {
    if (static_cast<int>(x.channels) != cfg_.in_channels) {
      throw InvalidArgument("model expects " + std::to_string(cfg_.in_channels) + " input channels, got " +
                            std::to_string(x.channels));
    }
    for (auto d : x.shape) {
      if (d == 0 || d % cfg_.divisor() != 0) {
        throw InvalidArgument("patch extents must be positive multiples of " + std::to_string(cfg_.divisor()));
      }
    }
    const int depth = cfg_.depth;
    Tensor<T> h = x;
    skips_.assign(static_cast<std::size_t>(depth), {});
    for (int s = 0; s < depth; ++s) {
      auto& st = encoder_[static_cast<std::size_t>(s)];
      if (s > 0) h = st.down.forward(h, phase);
      for (auto& b : st.blocks) h = b.forward(h, phase);
      if (s < depth - 1) skips_[static_cast<std::size_t>(s)] = h;
    }
    for (int s = depth - 2; s >= 0; --s) {
      auto& st = decoder_[static_cast<std::size_t>(s)];
      h = concat(st.up.forward(h), skips_[static_cast<std::size_t>(s)]);
      for (auto& b : st.blocks) h = b.forward(h, phase);
    }
    skips_.clear();
    probs_ = softmax_channels(head_.forward(h));
    return probs_;
  }

  /// Accumulates parameter gradients for dL/dprobabilities of the last forward().
  void backward(const Tensor<T>& grad_probs) {
    if (!grad_probs.same_layout(probs_)) throw InvalidArgument("gradient layout does not match last forward");
    backward_logits(softmax_backward(grad_probs, probs_));
  }

  void backward_logits(const Tensor<T>& grad_logits) {
    const int depth = cfg_.depth;
    Tensor<T> g = head_.backward(grad_logits, true);
    std::vector<Tensor<T>> skip_grads(static_cast<std::size_t>(depth));
    for (int s = 0; s <= depth - 2; ++s) {
      auto& st = decoder_[static_cast<std::size_t>(s)];
      for (auto it = st.blocks.rbegin(); it != st.blocks.rend(); ++it) g = it->backward(std::move(g));
      const std::size_t w = static_cast<std::size_t>(cfg_.width(s));
      auto [gu, gs] = split(g, w);
      skip_grads[static_cast<std::size_t>(s)] = std::move(gs);
      g = st.up.backward(gu);
    }
    for (int s = depth - 1; s >= 0; --s) {
      auto& st = encoder_[static_cast<std::size_t>(s)];
      if (s < depth - 1) {
        const auto& sg = skip_grads[static_cast<std::size_t>(s)];
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += sg.data[i];
      }
      for (int b = static_cast<int>(st.blocks.size()) - 1; b >= 0; --b) {
        const bool first_layer = s == 0 && b == 0;
        g = st.blocks[static_cast<std::size_t>(b)].backward(std::move(g), !first_layer);
      }
      if (s > 0) g = st.down.backward(std::move(g));
    }
  }

  void zero_grad() {
    for (auto* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), T(0));
  }

  /// Every trainable parameter in construction order.
  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    auto add_norm = [&](Norm<T>& n) {
      if (n.affine()) {
        out.push_back(&n.gamma);
        out.push_back(&n.beta);
      }
    };
    auto add_block = [&](auto& blk) {
      out.push_back(&blk.op.weight);
      out.push_back(&blk.op.bias);
      add_norm(blk.norm);
    };
    for (std::size_t s = 0; s < encoder_.size(); ++s) {
      if (s > 0) add_block(encoder_[s].down);
      for (auto& b : encoder_[s].blocks) add_block(b);
    }
    for (int s = static_cast<int>(decoder_.size()) - 1; s >= 0; --s) {
      auto& st = decoder_[static_cast<std::size_t>(s)];
      out.push_back(&st.up.weight);
      out.push_back(&st.up.bias);
      for (auto& b : st.blocks) add_block(b);
    }
    out.push_back(&head_.weight);
    out.push_back(&head_.bias);
    return out;
  }

  std::vector<Parameter<T>*> parameters(ParamGroup group) {
    std::vector<Parameter<T>*> out;
    for (auto* p : parameters()) {
      const bool keep = group == ParamGroup::All || (group == ParamGroup::Norm && p->is_norm) ||
                        (group == ParamGroup::Encoder && p->in_encoder) ||
                        (group == ParamGroup::Decoder && !p->in_encoder);
      if (keep) out.push_back(p);
    }
    return out;
  }

  /// Running statistics of every batch-norm layer.
  std::vector<Buffer<T>> buffers() {
    std::vector<Buffer<T>> out;
    if (cfg_.norm != NormKind::Batch) return out;
    auto add = [&](Norm<T>& n) {
      const std::string owner = n.gamma.name.substr(0, n.gamma.name.size() - 6);  // drop ".gamma"
      out.push_back({owner + ".running_mean", &n.running_mean});
      out.push_back({owner + ".running_var", &n.running_var});
    };
    for (std::size_t s = 0; s < encoder_.size(); ++s) {
      if (s > 0) add(encoder_[s].down.norm);
      for (auto& b : encoder_[s].blocks) add(b.norm);
    }
    for (int s = static_cast<int>(decoder_.size()) - 1; s >= 0; --s) {
      for (auto& b : decoder_[static_cast<std::size_t>(s)].blocks) add(b.norm);
    }
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->size();
    return n;
  }

 private:
  using ConvBlock = OpNormAct<T, Conv3d<T>>;
  using DownBlock = OpNormAct<T, DownConv<T>>;

  struct EncoderStage {
    DownBlock down;
    std::vector<ConvBlock> blocks;
  };
  struct DecoderStage {
    UpConv<T> up;
    std::vector<ConvBlock> blocks;
  };

  ConvBlock make_conv_block(const std::string& name, int in, int out, std::mt19937_64& rng) {
    ConvBlock b;
    b.op = Conv3d<T>(name, in, out, 3, rng);
    b.norm = Norm<T>(name + ".norm", cfg_.norm, out, cfg_.norm_affine);
    return b;
  }

  static Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> out(a.batch, a.channels + b.channels, a.shape);
    for (std::size_t n = 0; n < a.batch; ++n) {
      std::copy(a.sample(n), a.sample(n) + a.sample_size(), out.sample(n));
      std::copy(b.sample(n), b.sample(n) + b.sample_size(), out.sample(n) + a.sample_size());
    }
    return out;
  }

  static std::pair<Tensor<T>, Tensor<T>> split(const Tensor<T>& g, std::size_t first) {
    Tensor<T> a(g.batch, first, g.shape), b(g.batch, g.channels - first, g.shape);
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* src = g.sample(n);
      std::copy(src, src + a.sample_size(), a.sample(n));
      std::copy(src + a.sample_size(), src + g.sample_size(), b.sample(n));
    }
    return {std::move(a), std::move(b)};
  }

  SegModelConfig cfg_;
  std::vector<EncoderStage> encoder_;
  std::vector<DecoderStage> decoder_;
  Conv3d<T> head_;
  std::vector<Tensor<T>> skips_;
  Tensor<T> probs_;
};

extern template class SegModel<float>;
extern template class SegModel<double>;

}  // namespace dgtta::nn
