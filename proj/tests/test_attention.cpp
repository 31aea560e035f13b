#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "relparcel/attention.hpp"
#include "relparcel/errors.hpp"
#include "relparcel/gradcheck.hpp"
#include "relparcel/ops.hpp"

using namespace relparcel;

namespace {

bool same_points(const SamplingGrid& g, std::vector<Point> expect) {
  if (g.points.size() != expect.size()) return false;
  for (std::size_t i = 0; i < expect.size(); ++i) {
    if (std::abs(g.points[i].x - expect[i].x) > 1e-15 || std::abs(g.points[i].y - expect[i].y) > 1e-15) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("attention") {
  TEST_CASE("identity transform matrix") {
    const auto m = init_identity().matrix();
    CHECK(m[0] == std::array<double, 3>{1, 0, 0});
    CHECK(m[1] == std::array<double, 3>{0, 1, 0});
    const RegionCorners c = region_corners(init_identity());
    CHECK(c.bottom_left == Point{-1, -1});
    CHECK(c.top_right == Point{1, 1});
  }

  TEST_CASE("region corner goldens") {
    const RegionCorners c = region_corners({0.5, 0.5, 0.25, -0.5});
    CHECK(c.bottom_left == Point{-0.25, -1.0});
    CHECK(c.top_right == Point{0.75, 0.0});
    const RegionCorners t = region_corners({1, 1, 0.2, 0.2});
    CHECK(t.bottom_left.x == doctest::Approx(-0.8));
    CHECK(t.bottom_left.y == doctest::Approx(-0.8));
    CHECK(t.top_right.x == doctest::Approx(1.2));
    CHECK(t.top_right.y == doctest::Approx(1.2));
  }

  TEST_CASE("grid generation") {
    CHECK(same_points(generate_grid(init_identity(), 2, 2), {{-1, -1}, {1, -1}, {-1, 1}, {1, 1}}));
    CHECK(same_points(generate_grid({0.5, 0.5, 0, 0}, 2, 2), {{-0.5, -0.5}, {0.5, -0.5}, {-0.5, 0.5}, {0.5, 0.5}}));
    const SamplingGrid id = generate_grid(init_identity(), 4, 5), src = source_grid(4, 5);
    CHECK(id.points == src.points);
    const SamplingGrid shifted = generate_grid({1, 1, 0.3, 0}, 4, 5);
    for (std::size_t i = 0; i < src.points.size(); ++i) {
      CHECK(shifted.points[i].x == doctest::Approx(src.points[i].x + 0.3));
      CHECK(shifted.points[i].y == src.points[i].y);
    }
  }

  TEST_CASE("corners agree with extreme grid points") {
    const TransformMatrix m{0.7, 0.4, -0.1, 0.25};
    const SamplingGrid g = generate_grid(m, 5, 6);
    const RegionCorners c = region_corners(m);
    CHECK(g.at(0, 0).x == doctest::Approx(c.bottom_left.x));
    CHECK(g.at(0, 0).y == doctest::Approx(c.bottom_left.y));
    CHECK(g.at(4, 5).x == doctest::Approx(c.top_right.x));
    CHECK(g.at(4, 5).y == doctest::Approx(c.top_right.y));
  }

  TEST_CASE("half-scale grid lies strictly inside the full grid") {
    const SamplingGrid half = generate_grid({0.5, 0.5, 0, 0}, 6, 6);
    for (const auto& p : half.points) {
      CHECK(std::abs(p.x) < 1.0);
      CHECK(std::abs(p.y) < 1.0);
    }
  }

  TEST_CASE("bilinear sample goldens") {
    const Tensor x = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
    const SamplingGrid corner{1, 1, {{-1, -1}}}, centre{1, 1, {{0, 0}}};
    CHECK(bilinear_sample(x, corner).item() == 1.0);
    CHECK(bilinear_sample(x, centre).item() == 2.5);
    const SamplingGrid outside{1, 1, {{5, -7}}};
    CHECK(bilinear_sample(x, outside).item() == 2.0);  // clamped to (x=1, y=-1)
  }

  TEST_CASE("identity round trip on 100 random parcels") {
    Rng rng(17);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const std::size_t k = static_cast<std::size_t>(rng.integer(1, 4)), h = static_cast<std::size_t>(rng.integer(2, 9)),
                        w = static_cast<std::size_t>(rng.integer(2, 9));
      const Tensor x = oracle::random({k, h, w}, rng);
      const Tensor y = bilinear_sample(x, generate_grid(init_identity(), h, w));
      for (std::size_t j = 0; j < x.numel(); ++j) worst = std::max(worst, std::abs(y[j] - x[j]));
    }
    CHECK(worst <= 1e-12);
  }

  TEST_CASE("tensor grid and point grid agree") {
    Rng rng(19);
    const Tensor x = oracle::random({2, 5, 4}, rng);
    const Tensor theta = Tensor::from({4}, {0.6, 0.9, 0.2, -0.3});
    const Tensor a = bilinear_sample(x, affine_grid(theta, 5, 4));
    const Tensor b = bilinear_sample(x, generate_grid(transform_from(theta), 5, 4));
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
  }

  TEST_CASE("identity localizer") {
    Rng rng(23);
    const Localizer loc = build_localizer(2 * 3 * 3);
    const FeatureParcel p{0, oracle::random({2, 3, 3}, rng)};
    const Tensor theta = localize(p, loc);
    CHECK(theta.numel() == 4);
    CHECK(transform_from(theta) == init_identity());
    const AttentionalParcel a = extract_region(p, loc);
    CHECK(a.maps.shape() == p.maps.shape());
    for (std::size_t i = 0; i < a.maps.numel(); ++i) CHECK(std::abs(a.maps[i] - p.maps[i]) <= 1e-12);
  }

  TEST_CASE("localizer input size mismatch") {
    const Localizer loc = build_localizer(8);
    CHECK_THROWS_AS(localize({0, Tensor::zeros({2, 3, 3})}, loc), DimensionError);
  }

  TEST_CASE("composite gradient") {
    Rng rng(29);
    for (int trial = 0; trial < 3; ++trial) {
      const Tensor maps = oracle::random({2, 4, 4}, rng);
      const Localizer loc{oracle::random({4, 32}, rng, -0.01, 0.01),
                          Tensor::from({4}, {rng.uniform(0.5, 0.9), rng.uniform(0.5, 0.9), rng.uniform(-0.1, 0.1),
                                             rng.uniform(-0.1, 0.1)})};
      const Tensor probe = oracle::random({1, 32}, rng);
      const double err = grad_check(
          [&] { return fully_connected(flatten(extract_region({0, maps}, loc).maps), probe, Tensor::zeros({1})); },
          {maps, loc.weights, loc.bias});
      CHECK(err < 1e-4);
    }
  }
}
