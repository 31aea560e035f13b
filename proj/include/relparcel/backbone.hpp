#ifndef RELPARCEL_BACKBONE_HPP
#define RELPARCEL_BACKBONE_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "relparcel/rng.hpp"
#include "relparcel/tensor.hpp"

namespace relparcel {

/*
 Backbone
 ~~~~~~~~
 A stack of 3x3 conv + relu blocks with optional 2x2/2 max-pooling after each
 block. `drop_last_pool` removes the final pooling stage that would otherwise
 run (trading depth of downsampling for a larger feature map), and
 `dilation_last_block` dilates the last block's convolution. Padding equals the
 dilation so every conv preserves spatial size.
*/
struct BackboneConfig {
  std::size_t input_size = 32;
  std::size_t input_channels = 1;
  std::vector<std::size_t> block_channels{16, 32};
  std::vector<bool> pool_after_block{true, false};
  std::size_t dilation_last_block = 1;
  bool drop_last_pool = false;

  /// Throws ConfigError when the config is unusable.
  void validate() const;
  /// Number of pooling stages actually applied.
  std::size_t applied_pools() const;
  /// Side of the output feature map.
  std::size_t output_size() const;
  std::size_t output_channels() const { return block_channels.back(); }
};

struct ConvLayer {
  Tensor weights;  // [C_out, C_in, 3, 3]
  Tensor bias;     // [C_out]
  std::size_t dilation = 1;
  bool pool_after = false;
};

/// Glorot-uniform weights in [-sqrt(6/(fan_in+fan_out)), +...], zero bias.
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng,
                      bool requires_grad = true);

class Backbone {
 public:
  Backbone() = default;
  Backbone(BackboneConfig config, std::vector<ConvLayer> layers)
      : config_(std::move(config)), layers_(std::move(layers)) {}

  const BackboneConfig& config() const { return config_; }
  const std::vector<ConvLayer>& layers() const { return layers_; }
  std::vector<ConvLayer>& layers() { return layers_; }
  std::size_t parameter_count() const;

 private:
  BackboneConfig config_;
  std::vector<ConvLayer> layers_;
};

Backbone build_backbone(const BackboneConfig& config, std::uint64_t seed);

/// image [C, S, S] with S = input_size -> [C_f, H_f, W_f].
Tensor backbone_forward(const Backbone& bb, const Tensor& image);

}  // namespace relparcel

#endif  // RELPARCEL_BACKBONE_HPP
