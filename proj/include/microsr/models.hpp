#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "microsr/container.hpp"
#include "microsr/ops.hpp"
#include "microsr/optim.hpp"

namespace microsr {

template <typename T>
struct NamedParam {
  std::string name;
  TensorPtr<T> tensor;
};

struct GeneratorConfig {
  std::int64_t num_rrdb = 23;
  std::int64_t base_channels = 64;
  std::int64_t growth_channels = 32;
  std::int64_t convs_per_dense_block = 5;
  std::int64_t dense_blocks_per_rrdb = 3;
  double residual_scale = 0.2;
  double leak = 0.2;
  double init_scale = 0.1;
  std::int64_t upscale = 2;
  std::int64_t in_channels = 1;

  void validate() const {
    if (num_rrdb < 1) throw DataError("generator config: num_rrdb must be >= 1");
    if (upscale != 2) throw DataError("generator config: upscale is fixed at 2");
    if (!(residual_scale >= 0.0 && residual_scale <= 1.0)) {
      throw DataError("generator config: residual_scale must be in [0,1]");
    }
    if (convs_per_dense_block < 2) {
      throw DataError("generator config: convs_per_dense_block must be >= 2");
    }
    if (base_channels < 1 || growth_channels < 1 || dense_blocks_per_rrdb < 1) {
      throw DataError("generator config: channel/block counts must be >= 1");
    }
  }
};

struct DiscriminatorConfig {
  std::int64_t input_size = 128;
  std::vector<std::int64_t> channel_sequence = {64, 64, 128, 128, 256, 256, 512, 512};
  std::int64_t dense_units = 1024;
  double leak = 0.2;
  double init_scale = 0.1;
  std::int64_t in_channels = 1;

  // Stage i uses stride 1 for even i, stride 2 for odd i.
  std::int64_t stride_at(std::size_t i) const { return (i % 2 == 0) ? 1 : 2; }

  std::int64_t final_spatial() const {
    std::int64_t s = input_size;
    for (std::size_t i = 0; i < channel_sequence.size(); ++i) {
      s = (s + 2 - 3) / stride_at(i) + 1;
    }
    return s;
  }

  void validate() const {
    if (channel_sequence.empty()) throw DataError("discriminator config: empty channel sequence");
    if (final_spatial() < 1) {
      throw DataError("discriminator config: input size " + std::to_string(input_size) +
                      " collapses below 1 px through the strided stages");
    }
    if (dense_units < 1) throw DataError("discriminator config: dense_units must be >= 1");
  }
};

struct FeatureExtractorConfig {
  std::string weight_file;  // empty -> seeded-random frozen weights
  std::uint64_t seed = 0;
  // Output is taken after the last conv of this block, before its activation.
  // 0 is the degenerate passthrough that returns the input unchanged.
  std::int64_t truncate_block = 3;
  std::vector<std::int64_t> block_channels = {64, 128, 256};
  std::vector<std::int64_t> convs_per_block = {2, 2, 4};
  std::int64_t in_channels = 3;

  void validate() const {
    if (block_channels.size() != convs_per_block.size()) {
      throw DataError("extractor config: block_channels/convs_per_block length mismatch");
    }
    if (truncate_block < 0 ||
        truncate_block > static_cast<std::int64_t>(block_channels.size())) {
      throw DataError("extractor config: truncate_block out of range");
    }
  }
};

namespace detail {

inline std::int64_t conv_param_count(std::int64_t in, std::int64_t out, std::int64_t k) {
  return in * out * k * k + out;
}

}  // namespace detail

// Densely connected conv stack with a scaled residual connection. Conv k sees
// the input concatenated with every previous conv output; all but the last
// emit growth channels through a leaky ReLU, the last maps back to the input
// channel count.
template <typename T>
class DenseBlock {
 public:
  DenseBlock(const GeneratorConfig& cfg, const std::string& prefix, std::uint64_t seed,
             std::vector<NamedParam<T>>& registry)
      : base_(cfg.base_channels),
        growth_(cfg.growth_channels),
        nconv_(cfg.convs_per_dense_block),
        leak_(static_cast<T>(cfg.leak)),
        beta_(static_cast<T>(cfg.residual_scale)) {
    for (std::int64_t k = 0; k < nconv_; ++k) {
      const std::int64_t in_ch = base_ + k * growth_;
      const std::int64_t out_ch = (k + 1 == nconv_) ? base_ : growth_;
      auto w = msra_init<T>(Shape{out_ch, in_ch, 3, 3}, cfg.leak, cfg.init_scale,
                            mix_seed(seed, static_cast<std::uint64_t>(k)));
      auto b = zeros<T>(Shape{out_ch}, true);
      const std::string stem = prefix + "/conv" + std::to_string(k + 1);
      registry.push_back({stem + "/w", w});
      registry.push_back({stem + "/b", b});
      weights_.push_back(w);
      biases_.push_back(b);
    }
  }

  TensorPtr<T> forward(const TensorPtr<T>& x) const {
    if (x->shape.size() != 4 || x->shape[1] != base_) {
      throw ShapeError("dense block: expected " + std::to_string(base_) + " channels, got " +
                       shape_str(x->shape));
    }
    std::vector<TensorPtr<T>> feats{x};
    TensorPtr<T> last;
    for (std::int64_t k = 0; k < nconv_; ++k) {
      auto in = (feats.size() == 1) ? feats[0] : concat_channels(feats);
      last = conv2d(in, weights_[k], biases_[k], 1, 1);
      if (k + 1 < nconv_) {
        last = leaky_relu(last, leak_);
        feats.push_back(last);
      }
    }
    return add(x, scale(last, beta_));
  }

 private:
  std::int64_t base_, growth_, nconv_;
  T leak_, beta_;
  std::vector<TensorPtr<T>> weights_;
  std::vector<TensorPtr<T>> biases_;
};

// Residual-in-residual dense block: y = x + beta * DB3(DB2(DB1(x))).
template <typename T>
class Rrdb {
 public:
  Rrdb(const GeneratorConfig& cfg, const std::string& prefix, std::uint64_t seed,
       std::vector<NamedParam<T>>& registry)
      : beta_(static_cast<T>(cfg.residual_scale)) {
    for (std::int64_t j = 0; j < cfg.dense_blocks_per_rrdb; ++j) {
      blocks_.emplace_back(cfg, prefix + "/db" + std::to_string(j + 1),
                           mix_seed(seed, static_cast<std::uint64_t>(j)), registry);
    }
  }

  TensorPtr<T> forward(const TensorPtr<T>& x) const {
    auto y = x;
    for (const auto& db : blocks_) y = db.forward(y);
    return add(x, scale(y, beta_));
  }

 private:
  T beta_;
  std::vector<DenseBlock<T>> blocks_;
};

// RRDB generator: most computation happens at LR scale, then a nearest
// upsample and two HR-domain convs produce the 2x output. Output values are
// unbounded; clamping to [0,1] happens only when exporting images.
template <typename T>
class Generator {
 public:
  Generator(const GeneratorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    auto w_of = [&](std::uint64_t stream, Shape shape) {
      return msra_init<T>(shape, cfg.leak, cfg.init_scale, mix_seed(seed, stream));
    };
    conv_first_w_ = w_of(0, {cfg.base_channels, cfg.in_channels, 3, 3});
    conv_first_b_ = zeros<T>(Shape{cfg.base_channels}, true);
    params_.push_back({"conv_first/w", conv_first_w_});
    params_.push_back({"conv_first/b", conv_first_b_});
    for (std::int64_t i = 0; i < cfg.num_rrdb; ++i) {
      rrdbs_.emplace_back(cfg, "rrdb" + std::to_string(i), mix_seed(seed, 100 + i), params_);
    }
    trunk_w_ = w_of(1, {cfg.base_channels, cfg.base_channels, 3, 3});
    trunk_b_ = zeros<T>(Shape{cfg.base_channels}, true);
    up_w_ = w_of(2, {cfg.base_channels, cfg.base_channels, 3, 3});
    up_b_ = zeros<T>(Shape{cfg.base_channels}, true);
    last_w_ = w_of(3, {cfg.in_channels, cfg.base_channels, 3, 3});
    last_b_ = zeros<T>(Shape{cfg.in_channels}, true);
    params_.push_back({"trunk_conv/w", trunk_w_});
    params_.push_back({"trunk_conv/b", trunk_b_});
    params_.push_back({"conv_up/w", up_w_});
    params_.push_back({"conv_up/b", up_b_});
    params_.push_back({"conv_last/w", last_w_});
    params_.push_back({"conv_last/b", last_b_});
  }

  TensorPtr<T> forward(const TensorPtr<T>& lr) const {
    if (lr->shape.size() != 4 || lr->shape[1] != cfg_.in_channels) {
      throw ShapeError("generator: expected Nx" + std::to_string(cfg_.in_channels) +
                       "xHxW input, got " + shape_str(lr->shape));
    }
    if (lr->shape[2] < 16 || lr->shape[3] < 16) {
      throw ShapeError("generator: spatial dims must be >= 16, got " + shape_str(lr->shape));
    }
    auto fea = conv2d(lr, conv_first_w_, conv_first_b_, 1, 1);
    auto trunk = fea;
    for (const auto& r : rrdbs_) trunk = r.forward(trunk);
    trunk = conv2d(trunk, trunk_w_, trunk_b_, 1, 1);
    fea = add(fea, trunk);
    auto up = upsample_nearest(fea, cfg_.upscale);
    up = leaky_relu(conv2d(up, up_w_, up_b_, 1, 1), static_cast<T>(cfg_.leak));
    return conv2d(up, last_w_, last_b_, 1, 1);
  }

  const GeneratorConfig& config() const { return cfg_; }
  std::vector<NamedParam<T>>& params() { return params_; }
  const std::vector<NamedParam<T>>& params() const { return params_; }
  const std::vector<Rrdb<T>>& rrdbs() const { return rrdbs_; }

  std::int64_t param_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.tensor->size();
    return n;
  }

 private:
  GeneratorConfig cfg_;
  TensorPtr<T> conv_first_w_, conv_first_b_, trunk_w_, trunk_b_, up_w_, up_b_, last_w_, last_b_;
  std::vector<Rrdb<T>> rrdbs_;
  std::vector<NamedParam<T>> params_;
};

// VGG-style discriminator: strided 3x3 convs with leaky ReLU, flatten, a
// hidden dense layer and a single raw logit (no sigmoid).
template <typename T>
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    std::int64_t in_ch = cfg.in_channels;
    for (std::size_t i = 0; i < cfg.channel_sequence.size(); ++i) {
      const std::int64_t out_ch = cfg.channel_sequence[i];
      auto w = msra_init<T>(Shape{out_ch, in_ch, 3, 3}, cfg.leak, cfg.init_scale,
                            mix_seed(seed, i));
      auto b = zeros<T>(Shape{out_ch}, true);
      const std::string stem = "stage" + std::to_string(i);
      params_.push_back({stem + "/w", w});
      params_.push_back({stem + "/b", b});
      conv_w_.push_back(w);
      conv_b_.push_back(b);
      in_ch = out_ch;
    }
    const std::int64_t s = cfg.final_spatial();
    flat_dim_ = in_ch * s * s;
    fc1_w_ = msra_init<T>(Shape{flat_dim_, cfg.dense_units}, cfg.leak, cfg.init_scale,
                          mix_seed(seed, 1000));
    fc1_b_ = zeros<T>(Shape{cfg.dense_units}, true);
    fc2_w_ = msra_init<T>(Shape{cfg.dense_units, 1}, cfg.leak, cfg.init_scale,
                          mix_seed(seed, 1001));
    fc2_b_ = zeros<T>(Shape{1}, true);
    params_.push_back({"fc1/w", fc1_w_});
    params_.push_back({"fc1/b", fc1_b_});
    params_.push_back({"fc2/w", fc2_w_});
    params_.push_back({"fc2/b", fc2_b_});
  }

  // Returns raw logits, shape N x 1.
  TensorPtr<T> forward(const TensorPtr<T>& img) const {
    if (img->shape.size() != 4 || img->shape[1] != cfg_.in_channels ||
        img->shape[2] != cfg_.input_size || img->shape[3] != cfg_.input_size) {
      throw ShapeError("discriminator: expected Nx" + std::to_string(cfg_.in_channels) + "x" +
                       std::to_string(cfg_.input_size) + "x" + std::to_string(cfg_.input_size) +
                       " input (flatten dim is static), got " + shape_str(img->shape));
    }
    auto x = img;
    for (std::size_t i = 0; i < conv_w_.size(); ++i) {
      x = conv2d(x, conv_w_[i], conv_b_[i], cfg_.stride_at(i), 1);
      x = leaky_relu(x, static_cast<T>(cfg_.leak));
    }
    x = reshape(x, Shape{img->shape[0], flat_dim_});
    x = leaky_relu(dense(x, fc1_w_, fc1_b_), static_cast<T>(cfg_.leak));
    return dense(x, fc2_w_, fc2_b_);
  }

  const DiscriminatorConfig& config() const { return cfg_; }
  std::vector<NamedParam<T>>& params() { return params_; }
  const std::vector<NamedParam<T>>& params() const { return params_; }

 private:
  DiscriminatorConfig cfg_;
  std::vector<TensorPtr<T>> conv_w_, conv_b_;
  TensorPtr<T> fc1_w_, fc1_b_, fc2_w_, fc2_b_;
  std::int64_t flat_dim_ = 0;
  std::vector<NamedParam<T>> params_;
};

// Frozen convolutional feature extractor for the perceptual and texture
// losses. The layout follows the classic 19-layer classifier up to block 3;
// the output is taken before the activation of the block's last conv.
// Weights come from a container file when configured, otherwise from a
// seeded normal draw; either way they never receive gradients.
template <typename T>
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const FeatureExtractorConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    std::int64_t in_ch = cfg.in_channels;
    for (std::size_t b = 0; b < cfg.block_channels.size(); ++b) {
      const std::int64_t out_ch = cfg.block_channels[b];
      for (std::int64_t j = 0; j < cfg.convs_per_block[b]; ++j) {
        const std::string stem =
            "block" + std::to_string(b + 1) + "/conv" + std::to_string(j + 1);
        auto w = msra_init<T>(Shape{out_ch, in_ch, 3, 3}, 0.0, 1.0,
                              mix_seed(cfg.seed, b * 100 + static_cast<std::uint64_t>(j)),
                              /*requires_grad=*/false);
        auto bias = zeros<T>(Shape{out_ch}, false);
        params_.push_back({stem + "/w", w});
        params_.push_back({stem + "/b", bias});
        conv_w_.push_back(w);
        conv_b_.push_back(bias);
        in_ch = out_ch;
      }
    }
    if (!cfg.weight_file.empty()) load_weights(cfg.weight_file);
  }

  // Grayscale inputs are replicated across the expected input channels.
  // Gradients flow through to the image; the extractor parameters never
  // receive any.
  TensorPtr<T> forward(const TensorPtr<T>& img) const {
    if (cfg_.truncate_block == 0) return img;
    auto x = img;
    if (x->shape[1] == 1 && cfg_.in_channels > 1) x = repeat_channel(x, cfg_.in_channels);
    if (x->shape[1] != cfg_.in_channels) {
      throw ShapeError("feature extractor: expected " + std::to_string(cfg_.in_channels) +
                       " channels, got " + shape_str(img->shape));
    }
    std::size_t layer = 0;
    for (std::int64_t b = 0; b < cfg_.truncate_block; ++b) {
      for (std::int64_t j = 0; j < cfg_.convs_per_block[b]; ++j, ++layer) {
        x = conv2d(x, conv_w_[layer], conv_b_[layer], 1, 1);
        const bool is_output = (b + 1 == cfg_.truncate_block) && (j + 1 == cfg_.convs_per_block[b]);
        if (!is_output) x = leaky_relu(x, T(0));
      }
      if (b + 1 < cfg_.truncate_block) x = maxpool2x2(x);
    }
    return x;
  }

  const FeatureExtractorConfig& config() const { return cfg_; }
  const std::vector<NamedParam<T>>& params() const { return params_; }

 private:
  void load_weights(const std::string& path) {
    Container c = Container::load(path);
    std::string diff;
    for (auto& p : params_) {
      const std::string key = "ext/" + p.name;
      if (!c.has(key)) {
        diff += "  missing: " + key + " " + shape_str(p.tensor->shape) + "\n";
        continue;
      }
      Shape got;
      std::vector<T> values;
      try {
        values = c.get_array<T>(key, &got);
      } catch (const DataError&) {
        diff += "  dtype mismatch: " + key + "\n";
        continue;
      }
      if (got != p.tensor->shape) {
        diff += "  shape mismatch: " + key + " file " + shape_str(got) + " vs model " +
                shape_str(p.tensor->shape) + "\n";
        continue;
      }
      p.tensor->data = std::move(values);
    }
    if (!diff.empty()) {
      throw DataError("extractor weight file '" + path +
                      "' incompatible with declared architecture:\n" + diff);
    }
  }

  FeatureExtractorConfig cfg_;
  std::vector<TensorPtr<T>> conv_w_, conv_b_;
  std::vector<NamedParam<T>> params_;
};

}  // namespace microsr
