#include "relparcel/parcels.hpp"

#include "relparcel/backbone.hpp"
#include "relparcel/errors.hpp"
#include "relparcel/ops.hpp"

namespace relparcel {

ParcelLayer build_parcel_layer(std::size_t feature_channels, std::size_t num_labels,
                               std::size_t parcel_channels, Rng& rng) {
  if (num_labels == 0 || parcel_channels == 0) {
    throw ConfigError("parcel layer needs num_labels > 0 and parcel_channels > 0");
  }
  const std::size_t filters = num_labels * parcel_channels;
  ParcelLayer layer;
  layer.num_labels = num_labels;
  layer.parcel_channels = parcel_channels;
  layer.weights = glorot_uniform({filters, feature_channels, 1, 1}, feature_channels, filters, rng);
  layer.bias = Tensor::zeros({filters}, true);
  return layer;
}

std::vector<FeatureParcel> parcel_forward(const Tensor& features, const Tensor& weights,
                                          const Tensor& bias, std::size_t num_labels,
                                          std::size_t parcel_channels) {
  if (weights.rank() != 4 || weights.dim(0) != num_labels * parcel_channels ||
      weights.dim(2) != 1 || weights.dim(3) != 1) {
    throw DimensionError("parcel weights " + shape_str(weights.shape()) + " do not hold " +
                         std::to_string(num_labels) + "x" + std::to_string(parcel_channels) +
                         " 1x1 filters");
  }
  const Tensor all = conv2d(features, weights, bias);
  std::vector<FeatureParcel> parcels;
  parcels.reserve(num_labels);
  for (std::size_t l = 0; l < num_labels; ++l) {
    parcels.push_back({l, slice_channels(all, parcel_channel_index(l, 0, parcel_channels), parcel_channels)});
  }
  return parcels;
}

}  // namespace relparcel
