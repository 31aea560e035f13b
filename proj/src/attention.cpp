#include "relparcel/attention.hpp"

#include <algorithm>
#include <cmath>

#include "relparcel/errors.hpp"
#include "relparcel/ops.hpp"

namespace relparcel {

namespace {

// Sampling position along one axis plus the derivative of that position with
// respect to the normalized coordinate (zero once clamped).
struct AxisSample {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double frac = 0.0;
  double dpos = 0.0;
};

AxisSample locate(double coord, std::size_t size) {
  AxisSample s;
  if (size == 1) return s;
  const double extent = static_cast<double>(size - 1);
  double pos = (coord + 1.0) * 0.5 * extent;
  s.dpos = 0.5 * extent;
  if (pos < 0.0) {
    pos = 0.0;
    s.dpos = 0.0;
  } else if (pos > extent) {
    pos = extent;
    s.dpos = 0.0;
  }
  const auto base = std::min(static_cast<std::size_t>(std::floor(pos)), size - 2);
  s.lo = base;
  s.hi = base + 1;
  s.frac = pos - static_cast<double>(base);
  return s;
}

}  // namespace

TransformMatrix init_identity() { return {}; }

TransformMatrix transform_from(const Tensor& theta) {
  if (theta.numel() != 4) {
    throw DimensionError("transform needs 4 parameters, got " + std::to_string(theta.numel()));
  }
  const auto v = theta.data();
  return {v[0], v[1], v[2], v[3]};
}

double grid_coordinate(std::size_t index, std::size_t size) {
  if (size < 2) return 0.0;
  return -1.0 + 2.0 * static_cast<double>(index) / static_cast<double>(size - 1);
}

SamplingGrid source_grid(std::size_t height, std::size_t width) {
  return generate_grid(init_identity(), height, width);
}

SamplingGrid generate_grid(const TransformMatrix& m, std::size_t height, std::size_t width) {
  SamplingGrid grid{height, width, {}};
  grid.points.reserve(height * width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      grid.points.push_back(apply(m, {grid_coordinate(c, width), grid_coordinate(r, height)}));
    }
  }
  return grid;
}

Tensor affine_grid(const Tensor& theta, std::size_t height, std::size_t width) {
  const TransformMatrix m = transform_from(theta);
  std::vector<double> out;
  out.reserve(height * width * 2);
  for (const auto& p : generate_grid(m, height, width).points) {
    out.push_back(p.x);
    out.push_back(p.y);
  }
  return make_result({height, width, 2}, std::move(out), {theta}, [height, width](detail::Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t r = 0; r < height; ++r) {
      const double y = grid_coordinate(r, height);
      for (std::size_t c = 0; c < width; ++c) {
        const double x = grid_coordinate(c, width);
        const double gx = self.grad[(r * width + c) * 2];
        const double gy = self.grad[(r * width + c) * 2 + 1];
        g[0] += gx * x;
        g[1] += gy * y;
        g[2] += gx;
        g[3] += gy;
      }
    }
  });
}

Tensor bilinear_sample(const Tensor& parcel, const Tensor& grid) {
  if (parcel.rank() != 3) throw DimensionError("bilinear_sample: parcel must be [K,H,W]");
  if (grid.rank() != 3 || grid.dim(2) != 2) throw DimensionError("bilinear_sample: grid must be [H,W,2]");
  const std::size_t k = parcel.dim(0), h = parcel.dim(1), w = parcel.dim(2);
  const std::size_t gh = grid.dim(0), gw = grid.dim(1), n = gh * gw;

  std::vector<AxisSample> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = locate(grid.data()[2 * i], w);
    ys[i] = locate(grid.data()[2 * i + 1], h);
  }
  std::vector<double> out(k * n);
  const auto in = parcel.data();
  for (std::size_t c = 0; c < k; ++c) {
    const double* plane = in.data() + c * h * w;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& sx = xs[i];
      const auto& sy = ys[i];
      const double top = plane[sy.lo * w + sx.lo] * (1.0 - sx.frac) + plane[sy.lo * w + sx.hi] * sx.frac;
      const double bottom = plane[sy.hi * w + sx.lo] * (1.0 - sx.frac) + plane[sy.hi * w + sx.hi] * sx.frac;
      out[c * n + i] = top * (1.0 - sy.frac) + bottom * sy.frac;
    }
  }
  return make_result(
      {k, gh, gw}, std::move(out), {parcel, grid},
      [k, h, w, n, xs = std::move(xs), ys = std::move(ys)](detail::Node& self) {
        const auto& in = self.inputs[0]->data;
        std::vector<double>* gp = self.inputs[0]->requires_grad ? &self.inputs[0]->ensure_grad() : nullptr;
        std::vector<double>* gg = self.inputs[1]->requires_grad ? &self.inputs[1]->ensure_grad() : nullptr;
        for (std::size_t c = 0; c < k; ++c) {
          const double* plane = in.data() + c * h * w;
          for (std::size_t i = 0; i < n; ++i) {
            const double g = self.grad[c * n + i];
            if (g == 0.0) continue;
            const auto& sx = xs[i];
            const auto& sy = ys[i];
            if (gp) {
              double* gplane = gp->data() + c * h * w;
              gplane[sy.lo * w + sx.lo] += g * (1.0 - sx.frac) * (1.0 - sy.frac);
              gplane[sy.lo * w + sx.hi] += g * sx.frac * (1.0 - sy.frac);
              gplane[sy.hi * w + sx.lo] += g * (1.0 - sx.frac) * sy.frac;
              gplane[sy.hi * w + sx.hi] += g * sx.frac * sy.frac;
            }
            if (gg) {
              const double v00 = plane[sy.lo * w + sx.lo], v01 = plane[sy.lo * w + sx.hi];
              const double v10 = plane[sy.hi * w + sx.lo], v11 = plane[sy.hi * w + sx.hi];
              const double d_dx = ((v01 - v00) * (1.0 - sy.frac) + (v11 - v10) * sy.frac) * sx.dpos;
              const double d_dy = ((v10 - v00) * (1.0 - sx.frac) + (v11 - v01) * sx.frac) * sy.dpos;
              (*gg)[2 * i] += g * d_dx;
              (*gg)[2 * i + 1] += g * d_dy;
            }
          }
        }
      });
}

Tensor bilinear_sample(const Tensor& parcel, const SamplingGrid& grid) {
  std::vector<double> coords;
  coords.reserve(grid.points.size() * 2);
  for (const auto& p : grid.points) {
    coords.push_back(p.x);
    coords.push_back(p.y);
  }
  return bilinear_sample(parcel, Tensor::from({grid.height, grid.width, 2}, std::move(coords)));
}

RegionCorners region_corners(const TransformMatrix& m) {
  return {apply(m, {-1.0, -1.0}), apply(m, {1.0, 1.0})};
}

Localizer build_localizer(std::size_t input_size) {
  return {Tensor::zeros({4, input_size}, true), Tensor::from({4}, {1.0, 1.0, 0.0, 0.0}, true)};
}

Tensor localize(const FeatureParcel& parcel, const Localizer& loc) {
  return fully_connected(flatten(parcel.maps), loc.weights, loc.bias);
}

AttentionalParcel extract_region(const FeatureParcel& parcel, const Localizer& loc) {
  Tensor theta = localize(parcel, loc);
  const std::size_t h = parcel.maps.dim(1), w = parcel.maps.dim(2);
  Tensor sampled = bilinear_sample(parcel.maps, affine_grid(theta, h, w));
  return {parcel.label, std::move(sampled), std::move(theta)};
}

}  // namespace relparcel
