#include "relparcel/backbone.hpp"

#include <cmath>

#include "relparcel/errors.hpp"
#include "relparcel/ops.hpp"

namespace relparcel {

namespace {

// Index of the pooling stage that drop_last_pool removes, or npos.
std::size_t dropped_pool(const BackboneConfig& c) {
  if (!c.drop_last_pool) return std::string::npos;
  for (std::size_t i = c.pool_after_block.size(); i-- > 0;) {
    if (c.pool_after_block[i]) return i;
  }
  return std::string::npos;
}

}  // namespace

void BackboneConfig::validate() const {
  if (block_channels.empty()) throw ConfigError("backbone: block_channels is empty");
  if (pool_after_block.size() != block_channels.size()) {
    throw ConfigError("backbone: pool_after_block has " + std::to_string(pool_after_block.size()) +
                      " entries for " + std::to_string(block_channels.size()) + " blocks");
  }
  for (auto c : block_channels) {
    if (c == 0) throw ConfigError("backbone: channel widths must be positive");
  }
  if (input_channels == 0) throw ConfigError("backbone: input_channels must be positive");
  if (dilation_last_block == 0) throw ConfigError("backbone: dilation_last_block must be positive");
  std::size_t side = input_size;
  const std::size_t dropped = dropped_pool(*this);
  for (std::size_t i = 0; i < block_channels.size(); ++i) {
    if (side == 0) throw ConfigError("backbone: feature map vanished");
    if (pool_after_block[i] && i != dropped) {
      if (side < 2) throw ConfigError("backbone: pooling a map smaller than 2x2");
      side /= 2;
    }
  }
  if (side < 2) {
    throw ConfigError("backbone: output feature map side " + std::to_string(side) +
                      " < 2 for input_size " + std::to_string(input_size));
  }
}

std::size_t BackboneConfig::applied_pools() const {
  const std::size_t dropped = dropped_pool(*this);
  std::size_t n = 0;
  for (std::size_t i = 0; i < pool_after_block.size(); ++i) {
    if (pool_after_block[i] && i != dropped) ++n;
  }
  return n;
}

std::size_t BackboneConfig::output_size() const {
  std::size_t side = input_size;
  for (std::size_t i = 0; i < applied_pools(); ++i) side /= 2;
  return side;
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng,
                      bool requires_grad) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(values), requires_grad);
}

std::size_t Backbone::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.numel() + l.bias.numel();
  return n;
}

Backbone build_backbone(const BackboneConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t dropped = dropped_pool(config);
  std::vector<ConvLayer> layers;
  std::size_t c_in = config.input_channels;
  for (std::size_t i = 0; i < config.block_channels.size(); ++i) {
    const std::size_t c_out = config.block_channels[i];
    ConvLayer layer;
    layer.weights = glorot_uniform({c_out, c_in, 3, 3}, 9 * c_in, 9 * c_out, rng);
    layer.bias = Tensor::zeros({c_out}, true);
    layer.dilation = i + 1 == config.block_channels.size() ? config.dilation_last_block : 1;
    layer.pool_after = config.pool_after_block[i] && i != dropped;
    layers.push_back(std::move(layer));
    c_in = c_out;
  }
  return Backbone(config, std::move(layers));
}

Tensor backbone_forward(const Backbone& bb, const Tensor& image) {
  const auto& cfg = bb.config();
  if (image.rank() != 3 || image.dim(0) != cfg.input_channels || image.dim(1) != cfg.input_size ||
      image.dim(2) != cfg.input_size) {
    throw DimensionError("backbone expects image (" + std::to_string(cfg.input_channels) + "," +
                         std::to_string(cfg.input_size) + "," + std::to_string(cfg.input_size) +
                         "), got " + shape_str(image.shape()));
  }
  Tensor x = image;
  for (const auto& layer : bb.layers()) {
    x = relu(conv2d(x, layer.weights, layer.bias,
                    {.stride = 1, .padding = layer.dilation, .dilation = layer.dilation}));
    if (layer.pool_after) x = maxpool2d(x, 2, 2);
  }
  return x;
}

}  // namespace relparcel
