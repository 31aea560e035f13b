#include <cmath>

#include "relparcel/attention.hpp"
#include "relparcel/gradcheck.hpp"
#include "relparcel/model.hpp"
#include "relparcel/ops.hpp"
#include "relparcel/relation.hpp"
#include "relparcel/rng.hpp"
#include "relparcel/training.hpp"

namespace relparcel {

namespace {

constexpr double kOpTolerance = 1e-5;
constexpr double kComposedTolerance = 1e-4;

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

// Scalar probe: fixed random weighting of every output element.
Tensor probe(const Tensor& y, const Tensor& weights) {
  return fully_connected(flatten(y), weights, Tensor::zeros({1}));
}

Tensor probe_weights(std::size_t n, Rng& rng) { return random_tensor({1, n}, rng); }

// Grid whose sample points stay at least `margin` pixels away from cell edges.
Tensor safe_grid(std::size_t gh, std::size_t gw, std::size_t h, std::size_t w, Rng& rng, double margin = 1e-3) {
  std::vector<double> v(gh * gw * 2);
  for (std::size_t i = 0; i < gh * gw; ++i) {
    for (int axis = 0; axis < 2; ++axis) {
      const double extent = static_cast<double>((axis == 0 ? w : h) - 1);
      double pos = 0.0;
      do {
        pos = rng.uniform(0.0, extent);
      } while (std::abs(pos - std::round(pos)) < margin);
      v[2 * i + axis] = pos / extent * 2.0 - 1.0;
    }
  }
  return Tensor::from({gh, gw, 2}, std::move(v));
}

}  // namespace

std::vector<GradCheckEntry> run_grad_check_suite(unsigned long long seed) {
  Rng rng = Rng::substream(seed, "gradcheck");
  std::vector<GradCheckEntry> out;
  auto record = [&out](std::string name, double err, double tol) { out.push_back({std::move(name), err, tol}); };

  {
    Tensor x = random_tensor({2, 5, 5}, rng), w = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
    Tensor pw = probe_weights(3 * 5 * 5, rng);
    record("conv2d(pad=1)", grad_check([&] { return probe(conv2d(x, w, b, {1, 1, 1}), pw); }, {x, w, b}),
           kOpTolerance);
    Tensor pw2 = probe_weights(3 * 2 * 2, rng);
    record("conv2d(stride=2)", grad_check([&] { return probe(conv2d(x, w, b, {2, 0, 1}), pw2); }, {x, w, b}),
           kOpTolerance);
    Tensor pw3 = probe_weights(3 * 5 * 5, rng);
    record("conv2d(dilation=2)", grad_check([&] { return probe(conv2d(x, w, b, {1, 2, 2}), pw3); }, {x, w, b}),
           kOpTolerance);
    Tensor w1 = random_tensor({4, 2, 1, 1}, rng), b1 = random_tensor({4}, rng);
    Tensor pw4 = probe_weights(4 * 5 * 5, rng);
    record("conv2d(1x1)", grad_check([&] { return probe(conv2d(x, w1, b1), pw4); }, {x, w1, b1}), kOpTolerance);
  }
  {
    Tensor x = random_tensor({2, 4, 4}, rng);
    Tensor pw = probe_weights(2 * 2 * 2, rng);
    record("maxpool2d", grad_check([&] { return probe(maxpool2d(x, 2, 2), pw); }, {x}), kOpTolerance);
  }
  {
    Tensor x = random_tensor({3, 4}, rng);
    Tensor pw = probe_weights(12, rng);
    record("relu", grad_check([&] { return probe(relu(x), pw); }, {x}), kOpTolerance);
    record("sigmoid", grad_check([&] { return probe(sigmoid(x), pw); }, {x}), kOpTolerance);
  }
  {
    Tensor x = random_tensor({5}, rng), w = random_tensor({3, 5}, rng), b = random_tensor({3}, rng);
    Tensor pw = probe_weights(3, rng);
    record("fully_connected", grad_check([&] { return probe(fully_connected(x, w, b), pw); }, {x, w, b}),
           kOpTolerance);
  }
  {
    Tensor x = random_tensor({3, 4, 5}, rng);
    Tensor pw = probe_weights(3, rng);
    record("global_avg_pool", grad_check([&] { return probe(global_avg_pool(x), pw); }, {x}), kOpTolerance);
  }
  {
    Tensor a = random_tensor({2, 3, 3}, rng), b = random_tensor({3, 3, 3}, rng);
    Tensor pw = probe_weights(5 * 9, rng);
    record("concat_channels", grad_check([&] { return probe(concat_channels(a, b), pw); }, {a, b}), kOpTolerance);
    Tensor pw2 = probe_weights(2 * 9, rng);
    record("slice_channels", grad_check([&] { return probe(slice_channels(b, 1, 2), pw2); }, {b}), kOpTolerance);
  }
  {
    Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng);
    Tensor pw = probe_weights(6, rng);
    record("elementwise_add", grad_check([&] { return probe(elementwise_add(a, b), pw); }, {a, b}), kOpTolerance);
    // a feeds two consumers: both contributions must be summed.
    record("shared_input", grad_check([&] { return probe(elementwise_add(relu(a), sigmoid(a)), pw); }, {a}),
           kOpTolerance);
    record("flatten_reshape", grad_check([&] { return probe(reshape(flatten(a), {3, 2}), pw); }, {a}),
           kOpTolerance);
  }
  {
    Tensor p = random_tensor({3}, rng, 0.05, 0.95);
    const MultiHotLabel y{1, 0, 1};
    record("bce_loss", grad_check([&] { return bce_loss(p, y); }, {p}), kOpTolerance);
  }
  {
    Tensor parcel = random_tensor({2, 4, 5}, rng);
    Tensor grid = safe_grid(3, 4, 4, 5, rng);
    Tensor pw = probe_weights(2 * 12, rng);
    record("bilinear_sample", grad_check([&] { return probe(bilinear_sample(parcel, grid), pw); }, {parcel, grid}),
           kOpTolerance);
    Tensor theta = Tensor::from({4}, {0.7, 0.8, 0.1, -0.15});
    Tensor pw2 = probe_weights(4 * 5 * 2, rng);
    record("affine_grid", grad_check([&] { return probe(affine_grid(theta, 4, 5), pw2); }, {theta}), kOpTolerance);
  }
  {
    // localize -> grid -> sample, with a transform that keeps samples off pixel edges.
    Tensor maps = random_tensor({2, 5, 5}, rng);
    Localizer loc{random_tensor({4, 50}, rng, -0.01, 0.01), Tensor::from({4}, {0.77, 0.83, 0.061, -0.043})};
    Tensor pw = probe_weights(50, rng);
    record("attention_composite", grad_check([&] {
             const AttentionalParcel a = extract_region({0, maps}, loc);
             return probe(a.maps, pw);
           }, {maps, loc.weights, loc.bias}),
           kComposedTolerance);
  }
  for (auto variant : {RelationVariant::conv1x1, RelationVariant::mlp}) {
    Rng init = Rng::substream(seed, "gradcheck.relation");
    RelationModule rel = build_relation_module(variant, 3, 2, 4, 5, init);
    std::vector<AttentionalParcel> parcels;
    std::vector<Tensor> params;
    for (std::size_t l = 0; l < 3; ++l) {
      parcels.push_back({l, random_tensor({2, 3, 3}, rng), {}});
      params.push_back(parcels.back().maps);
    }
    for (auto& u : rel.units()) {
      u.bias.mutable_data()[0] = 0.3;
      params.push_back(u.weights);
      params.push_back(u.bias);
    }
    params.push_back(rel.head().hidden_weights);
    params.push_back(rel.head().out_weights);
    const MultiHotLabel y{1, 0, 1};
    record("relation_" + to_string(variant), grad_check([&] { return bce_loss(forward_all(parcels, rel), y); }, params),
           kComposedTolerance);
  }
  {
    ModelConfig cfg;
    cfg.backbone.input_size = 16;
    cfg.backbone.block_channels = {3, 4};
    cfg.backbone.pool_after_block = {true, false};
    cfg.num_labels = 3;
    cfg.parcel_channels = 2;
    cfg.relation_channels = 4;
    cfg.head_hidden = 5;
    Model model = build_model(cfg, mix_seed(seed, "gradcheck.model"));
    for (const auto& loc : model.localizers()) {
      Tensor weights = loc.weights, bias = loc.bias;  // handles share storage
      for (auto& v : weights.mutable_data()) v = rng.uniform(-0.002, 0.002);
      auto b = bias.mutable_data();
      b[0] = rng.uniform(0.6, 0.9);
      b[1] = rng.uniform(0.6, 0.9);
      b[2] = rng.uniform(-0.2, 0.2);
      b[3] = rng.uniform(-0.2, 0.2);
    }
    Tensor image = random_tensor({1, 16, 16}, rng, 0.0, 1.0);
    const MultiHotLabel y{1, 0, 1};
    std::vector<Tensor> params = parameter_tensors(model);
    record("full_model", grad_check([&] { return bce_loss(model.forward(image).probabilities, y); }, params),
           kComposedTolerance);
  }
  return out;
}

}  // namespace relparcel
