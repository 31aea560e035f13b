#include "relparcel/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "relparcel/errors.hpp"

namespace relparcel {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

// Grad buffer of input i, or nullptr when that input is not tracked.
std::vector<double>* input_grad(detail::Node& self, std::size_t i) {
  auto& in = *self.inputs[i];
  return in.requires_grad ? &in.ensure_grad() : nullptr;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape()));
  }
}

struct ConvGeometry {
  std::size_t c_in, h, w, c_out, kh, kw, oh, ow;
  Conv2dOptions opt;
  std::size_t patch() const { return c_in * kh * kw; }
  std::size_t positions() const { return oh * ow; }
};

// Lowers the receptive fields to a [C_in*kh*kw, oh*ow] matrix.
std::vector<double> im2col(std::span<const double> in, const ConvGeometry& g) {
  std::vector<double> col(g.patch() * g.positions(), 0.0);
  const auto pad = static_cast<std::ptrdiff_t>(g.opt.padding);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    const double* plane = in.data() + c * g.h * g.w;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj, ++row) {
        double* dst = col.data() + row * g.positions();
        for (std::size_t y = 0; y < g.oh; ++y) {
          const auto iy = static_cast<std::ptrdiff_t>(y * g.opt.stride + ki * g.opt.dilation) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t x = 0; x < g.ow; ++x) {
            const auto ix =
                static_cast<std::ptrdiff_t>(x * g.opt.stride + kj * g.opt.dilation) - pad;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dst[y * g.ow + x] = plane[iy * static_cast<std::ptrdiff_t>(g.w) + ix];
          }
        }
      }
    }
  }
  return col;
}

void col2im_add(const double* col, const ConvGeometry& g, std::vector<double>& out) {
  const auto pad = static_cast<std::ptrdiff_t>(g.opt.padding);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    double* plane = out.data() + c * g.h * g.w;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj, ++row) {
        const double* src = col + row * g.positions();
        for (std::size_t y = 0; y < g.oh; ++y) {
          const auto iy = static_cast<std::ptrdiff_t>(y * g.opt.stride + ki * g.opt.dilation) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t x = 0; x < g.ow; ++x) {
            const auto ix =
                static_cast<std::ptrdiff_t>(x * g.opt.stride + kj * g.opt.dilation) - pad;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            plane[iy * static_cast<std::ptrdiff_t>(g.w) + ix] += src[y * g.ow + x];
          }
        }
      }
    }
  }
}

}  // namespace

std::size_t conv_output_size(std::size_t input, std::size_t kernel, const Conv2dOptions& opt) {
  if (opt.stride == 0 || opt.dilation == 0) throw DimensionError("conv2d: stride and dilation must be positive");
  const std::size_t span = opt.dilation * (kernel - 1) + 1;
  if (kernel == 0 || span > input + 2 * opt.padding) {
    throw DimensionError("conv2d: dilated kernel extent " + std::to_string(span) +
                         " exceeds padded input " + std::to_string(input + 2 * opt.padding));
  }
  return (input + 2 * opt.padding - span) / opt.stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const Conv2dOptions& opt) {
  require_rank(input, 3, "conv2d input");
  require_rank(weights, 4, "conv2d weights");
  if (weights.dim(1) != input.dim(0)) {
    throw DimensionError("conv2d: input has " + std::to_string(input.dim(0)) +
                         " channels, weights expect " + std::to_string(weights.dim(1)));
  }
  if (bias.numel() != weights.dim(0)) {
    throw DimensionError("conv2d: bias length " + std::to_string(bias.numel()) +
                         " != output channels " + std::to_string(weights.dim(0)));
  }
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), weights.dim(0),
                 weights.dim(2), weights.dim(3), 0, 0, opt};
  g.oh = conv_output_size(g.h, g.kh, opt);
  g.ow = conv_output_size(g.w, g.kw, opt);

  const bool one_by_one = g.kh == 1 && g.kw == 1 && opt.stride == 1 && opt.padding == 0;
  std::vector<double> col = one_by_one ? std::vector<double>() : im2col(input.data(), g);
  const double* col_ptr = one_by_one ? input.data().data() : col.data();

  std::vector<double> out(g.c_out * g.positions());
  MutMap out_m(out.data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.positions()));
  ConstMap w_m(weights.data().data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.patch()));
  ConstMap col_m(col_ptr, static_cast<Eigen::Index>(g.patch()), static_cast<Eigen::Index>(g.positions()));
  out_m.noalias() = w_m * col_m;
  for (std::size_t o = 0; o < g.c_out; ++o) {
    const double b = bias.data()[o];
    for (std::size_t p = 0; p < g.positions(); ++p) out[o * g.positions() + p] += b;
  }

  const bool keep_col = weights.requires_grad() && !one_by_one;
  return make_result(
      {g.c_out, g.oh, g.ow}, std::move(out), {input, weights, bias},
      [g, one_by_one, col = keep_col ? std::move(col) : std::vector<double>()](detail::Node& self) {
        const auto rows = static_cast<Eigen::Index>(g.c_out);
        const auto cols = static_cast<Eigen::Index>(g.positions());
        const auto patch = static_cast<Eigen::Index>(g.patch());
        ConstMap gout(self.grad.data(), rows, cols);
        if (auto* gw = input_grad(self, 1)) {
          const double* col_ptr = one_by_one ? self.inputs[0]->data.data() : col.data();
          std::vector<double> lowered;
          if (!one_by_one && col.empty()) {
            lowered = im2col(self.inputs[0]->data, g);
            col_ptr = lowered.data();
          }
          ConstMap col_m(col_ptr, patch, cols);
          MutMap gw_m(gw->data(), rows, patch);
          gw_m.noalias() += gout * col_m.transpose();
        }
        if (auto* gb = input_grad(self, 2)) {
          for (std::size_t o = 0; o < g.c_out; ++o) {
            double s = 0.0;
            for (std::size_t p = 0; p < g.positions(); ++p) s += self.grad[o * g.positions() + p];
            (*gb)[o] += s;
          }
        }
        if (auto* gi = input_grad(self, 0)) {
          ConstMap w_m(self.inputs[1]->data.data(), rows, patch);
          if (one_by_one) {
            MutMap gi_m(gi->data(), patch, cols);
            gi_m.noalias() += w_m.transpose() * gout;
          } else {
            RowMatrix dcol = w_m.transpose() * gout;
            col2im_add(dcol.data(), g, *gi);
          }
        }
      });
}

Tensor maxpool2d(const Tensor& input, std::size_t k, std::size_t stride) {
  require_rank(input, 3, "maxpool2d");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (k == 0 || stride == 0) throw DimensionError("maxpool2d: k and stride must be positive");
  if (k > h || k > w) {
    throw DimensionError("maxpool2d: window " + std::to_string(k) + " exceeds spatial extent " +
                         shape_str(input.shape()));
  }
  const std::size_t oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
  std::vector<double> out(c * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  const auto in = input.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (ch * h + y * stride) * w + x * stride;
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t idx = (ch * h + y * stride + i) * w + x * stride + j;
            if (in[idx] > in[best]) best = idx;  // strict: first occurrence wins ties
          }
        }
        const std::size_t o = (ch * oh + y) * ow + x;
        out[o] = in[best];
        argmax[o] = best;
      }
    }
  }
  return make_result({c, oh, ow}, std::move(out), {input},
                     [argmax = std::move(argmax)](detail::Node& self) {
                       auto* gi = input_grad(self, 0);
                       for (std::size_t o = 0; o < argmax.size(); ++o) (*gi)[argmax[o]] += self.grad[o];
                     });
}

Tensor activation(const Tensor& x, Activation kind) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  if (kind == Activation::relu) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
    return make_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
      auto* gi = input_grad(self, 0);
      const auto& v = self.inputs[0]->data;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] > 0.0) (*gi)[i] += self.grad[i];
      }
    });
  }
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - 0x1.0p-53;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in[i];
    const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    out[i] = std::clamp(s, lo, hi);
  }
  return make_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto* gi = input_grad(self, 0);
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      const double s = self.data[i];
      (*gi)[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor fully_connected(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  require_rank(x, 1, "fully_connected input");
  require_rank(weights, 2, "fully_connected weights");
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  if (x.numel() != n) {
    throw DimensionError("fully_connected: input length " + std::to_string(x.numel()) +
                         " != weight columns " + std::to_string(n));
  }
  if (bias.numel() != m) {
    throw DimensionError("fully_connected: bias length " + std::to_string(bias.numel()) +
                         " != weight rows " + std::to_string(m));
  }
  std::vector<double> out(m);
  const auto w = weights.data();
  const auto xv = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    double s = bias.data()[i];
    const double* row = w.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) s += row[j] * xv[j];
    out[i] = s;
  }
  return make_result({m}, std::move(out), {x, weights, bias}, [m, n](detail::Node& self) {
    const auto& xv = self.inputs[0]->data;
    const auto& w = self.inputs[1]->data;
    if (auto* gx = input_grad(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        const double g = self.grad[i];
        if (g == 0.0) continue;
        const double* row = w.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) (*gx)[j] += g * row[j];
      }
    }
    if (auto* gw = input_grad(self, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        const double g = self.grad[i];
        if (g == 0.0) continue;
        double* row = gw->data() + i * n;
        for (std::size_t j = 0; j < n; ++j) row[j] += g * xv[j];
      }
    }
    if (auto* gb = input_grad(self, 2)) {
      for (std::size_t i = 0; i < m; ++i) (*gb)[i] += self.grad[i];
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 3, "global_avg_pool");
  const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  if (hw == 0) throw DimensionError("global_avg_pool: empty spatial extent");
  std::vector<double> out(c);
  const auto in = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += in[ch * hw + i];
    out[ch] = s / static_cast<double>(hw);
  }
  return make_result({c}, std::move(out), {x}, [c, hw](detail::Node& self) {
    auto* gi = input_grad(self, 0);
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double g = self.grad[ch] * inv;
      for (std::size_t i = 0; i < hw; ++i) (*gi)[ch * hw + i] += g;
    }
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank(a, 3, "concat_channels");
  require_rank(b, 3, "concat_channels");
  if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw DimensionError("concat_channels: spatial mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  std::vector<double> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  const std::size_t split = a.numel();
  return make_result({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(out), {a, b},
                     [split](detail::Node& self) {
                       if (auto* ga = input_grad(self, 0)) {
                         for (std::size_t i = 0; i < split; ++i) (*ga)[i] += self.grad[i];
                       }
                       if (auto* gb = input_grad(self, 1)) {
                         for (std::size_t i = split; i < self.grad.size(); ++i) (*gb)[i - split] += self.grad[i];
                       }
                     });
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank(x, 3, "slice_channels");
  if (begin + count > x.dim(0)) {
    throw DimensionError("slice_channels: [" + std::to_string(begin) + "," +
                         std::to_string(begin + count) + ") outside " + shape_str(x.shape()));
  }
  const std::size_t plane = x.dim(1) * x.dim(2);
  const std::size_t offset = begin * plane;
  std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(offset),
                          x.data().begin() + static_cast<std::ptrdiff_t>(offset + count * plane));
  return make_result({count, x.dim(1), x.dim(2)}, std::move(out), {x}, [offset](detail::Node& self) {
    auto* gi = input_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*gi)[offset + i] += self.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts) {
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  const std::size_t n = out.size();
  return make_result({n}, std::move(out), parts, [offsets](detail::Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      auto* gi = input_grad(self, k);
      if (!gi) continue;
      for (std::size_t i = 0; i < gi->size(); ++i) (*gi)[i] += self.grad[offsets[k] + i];
    }
  });
}

Tensor elementwise_add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("elementwise_add: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* gi = input_grad(self, k)) {
        for (std::size_t i = 0; i < gi->size(); ++i) (*gi)[i] += self.grad[i];
      }
    }
  });
}

Tensor add_all(const std::vector<Tensor>& terms) {
  if (terms.empty()) throw ContractError("add_all: no terms");
  for (const auto& t : terms) {
    if (t.shape() != terms.front().shape()) {
      throw DimensionError("add_all: shape mismatch " + shape_str(t.shape()) + " vs " +
                           shape_str(terms.front().shape()));
    }
  }
  std::vector<double> out(terms.front().numel(), 0.0);
  for (const auto& t : terms) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += t.data()[i];
  }
  return make_result(terms.front().shape(), std::move(out), terms, [](detail::Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      if (auto* gi = input_grad(self, k)) {
        for (std::size_t i = 0; i < gi->size(); ++i) (*gi)[i] += self.grad[i];
      }
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * factor;
  return make_result(x.shape(), std::move(out), {x}, [factor](detail::Node& self) {
    auto* gi = input_grad(self, 0);
    for (std::size_t i = 0; i < gi->size(); ++i) (*gi)[i] += self.grad[i] * factor;
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result({1}, {s}, {x}, [](detail::Node& self) {
    auto* gi = input_grad(self, 0);
    for (auto& g : *gi) g += self.grad[0];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [](detail::Node& self) {
    auto* gi = input_grad(self, 0);
    for (std::size_t i = 0; i < gi->size(); ++i) (*gi)[i] += self.grad[i];
  });
}

Tensor flatten(const Tensor& x) { return reshape(x, {x.numel()}); }

}  // namespace relparcel
