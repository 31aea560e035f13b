#ifndef RELPARCEL_PARCELS_HPP
#define RELPARCEL_PARCELS_HPP

#include <cstddef>
#include <vector>

#include "relparcel/rng.hpp"
#include "relparcel/tensor.hpp"

namespace relparcel {

/// The K feature maps dedicated to one label.
struct FeatureParcel {
  std::size_t label = 0;
  Tensor maps;  // [K, H, W]
};

/// 1x1 convolution with K*L filters; label l owns output channels [lK, (l+1)K).
struct ParcelLayer {
  std::size_t num_labels = 0;
  std::size_t parcel_channels = 0;
  Tensor weights;  // [K*L, C_f, 1, 1]
  Tensor bias;     // [K*L]
};

ParcelLayer build_parcel_layer(std::size_t feature_channels, std::size_t num_labels,
                               std::size_t parcel_channels, Rng& rng);

/// Output channel of parcel channel k for label l.
constexpr std::size_t parcel_channel_index(std::size_t label, std::size_t k, std::size_t parcel_channels) {
  return label * parcel_channels + k;
}

std::vector<FeatureParcel> parcel_forward(const Tensor& features, const Tensor& weights,
                                          const Tensor& bias, std::size_t num_labels,
                                          std::size_t parcel_channels);

inline std::vector<FeatureParcel> parcel_forward(const Tensor& features, const ParcelLayer& layer) {
  return parcel_forward(features, layer.weights, layer.bias, layer.num_labels, layer.parcel_channels);
}

}  // namespace relparcel

#endif  // RELPARCEL_PARCELS_HPP
