#ifndef RELPARCEL_OPS_HPP
#define RELPARCEL_OPS_HPP

#include <cstddef>
#include <vector>

#include "relparcel/tensor.hpp"

namespace relparcel {

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
};

/// Output side for a convolution along one axis.
std::size_t conv_output_size(std::size_t input, std::size_t kernel, const Conv2dOptions& opt);

/// Cross-correlation of input [C_in,H,W] with weights [C_out,C_in,kh,kw] plus bias [C_out].
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const Conv2dOptions& opt = {});

/// Max over k×k windows. Backward goes to the first row-major argmax of each window.
Tensor maxpool2d(const Tensor& input, std::size_t k, std::size_t stride);

enum class Activation { relu, sigmoid };

Tensor activation(const Tensor& x, Activation kind);
inline Tensor relu(const Tensor& x) { return activation(x, Activation::relu); }
inline Tensor sigmoid(const Tensor& x) { return activation(x, Activation::sigmoid); }

/// W x + b for x [n], W [m,n], b [m].
Tensor fully_connected(const Tensor& x, const Tensor& weights, const Tensor& bias);

/// Per-channel spatial mean of [C,H,W] -> [C].
Tensor global_avg_pool(const Tensor& x);

/// [Ka,H,W] ++ [Kb,H,W] -> [Ka+Kb,H,W].
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Channels [begin, begin+count) of a [C,H,W] tensor.
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count);

/// Concatenation of flat tensors into one vector.
Tensor concat(const std::vector<Tensor>& parts);

Tensor elementwise_add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// Sum of all elements as a [1] tensor.
Tensor sum(const Tensor& x);
/// Elementwise sum of equally shaped tensors, accumulated in list order.
Tensor add_all(const std::vector<Tensor>& terms);

Tensor flatten(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

}  // namespace relparcel

#endif  // RELPARCEL_OPS_HPP
