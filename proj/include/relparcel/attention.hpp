#ifndef RELPARCEL_ATTENTION_HPP
#define RELPARCEL_ATTENTION_HPP

#include <array>
#include <cstddef>
#include <vector>

#include "relparcel/parcels.hpp"
#include "relparcel/tensor.hpp"

namespace relparcel {

/// Scale + translation transform
///   [x']   [s_x  0   t_x] [x]
///   [y'] = [ 0  s_y  t_y] [y]
///                         [1]
/// in normalized coordinates where the feature map spans [-1, 1].
struct TransformMatrix {
  double sx = 1.0;
  double sy = 1.0;
  double tx = 0.0;
  double ty = 0.0;

  std::array<std::array<double, 3>, 2> matrix() const { return {{{sx, 0.0, tx}, {0.0, sy, ty}}}; }
  bool operator==(const TransformMatrix&) const = default;
};

TransformMatrix init_identity();

/// Reads (s_x, s_y, t_x, t_y) from a length-4 tensor.
TransformMatrix transform_from(const Tensor& theta);

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

inline Point apply(const TransformMatrix& m, Point p) {
  return {m.sx * p.x + m.tx, m.sy * p.y + m.ty};
}

/// Row-major H x W array of normalized (x, y) sample coordinates.
struct SamplingGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Point> points;

  const Point& at(std::size_t row, std::size_t col) const { return points[row * width + col]; }
};

/// Evenly spaced coordinates over [-1, 1] with both endpoints included.
double grid_coordinate(std::size_t index, std::size_t size);

/// The regular source grid (identity transform).
SamplingGrid source_grid(std::size_t height, std::size_t width);
SamplingGrid generate_grid(const TransformMatrix& m, std::size_t height, std::size_t width);

/// Differentiable grid from theta = (s_x, s_y, t_x, t_y): result [H, W, 2] holding (x, y).
Tensor affine_grid(const Tensor& theta, std::size_t height, std::size_t width);

/// Bilinear resampling of parcel [K, H, W] at grid [H_g, W_g, 2].
/// Normalized coords map to pixels by p = (c + 1) / 2 * (size - 1); points
/// outside [-1, 1] are clamped to the border. Differentiable w.r.t. both inputs.
Tensor bilinear_sample(const Tensor& parcel, const Tensor& grid);
Tensor bilinear_sample(const Tensor& parcel, const SamplingGrid& grid);

struct RegionCorners {
  Point bottom_left;  // M (-1, -1, 1)^T
  Point top_right;    // M ( 1,  1, 1)^T
};

RegionCorners region_corners(const TransformMatrix& m);

/// One fully connected layer per label mapping the flattened parcel to theta.
struct Localizer {
  Tensor weights;  // [4, K*H*W]
  Tensor bias;     // [4]
};

/// Zero weights, bias (1, 1, 0, 0): outputs the identity transform.
Localizer build_localizer(std::size_t input_size);

/// theta = W flatten(parcel) + b, length 4.
Tensor localize(const FeatureParcel& parcel, const Localizer& loc);

struct AttentionalParcel {
  std::size_t label = 0;
  Tensor maps;   // [K, H, W], same shape as the source parcel
  Tensor theta;  // [4]
};

/// localize -> grid -> bilinear resample onto a grid the size of the parcel.
AttentionalParcel extract_region(const FeatureParcel& parcel, const Localizer& loc);

}  // namespace relparcel

#endif  // RELPARCEL_ATTENTION_HPP
