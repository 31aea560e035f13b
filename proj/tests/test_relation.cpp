#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "relparcel/errors.hpp"
#include "relparcel/ops.hpp"
#include "relparcel/relation.hpp"

using namespace relparcel;

namespace {

std::vector<AttentionalParcel> random_parcels(std::size_t L, std::size_t K, std::size_t side, Rng& rng) {
  std::vector<AttentionalParcel> out;
  for (std::size_t l = 0; l < L; ++l) out.push_back({l, oracle::random({K, side, side}, rng), {}});
  return out;
}

void fill(Tensor t, double v) {
  for (auto& x : t.mutable_data()) x = v;
}

void zero_module(RelationModule& m) {
  for (auto& u : m.units()) {
    fill(u.weights, 0.0);
    fill(u.bias, 0.0);
  }
  auto& h = m.head();
  if (h.hidden_weights.defined()) {
    fill(h.hidden_weights, 0.0);
    fill(h.hidden_bias, 0.0);
  }
  fill(h.out_weights, 0.0);
  fill(h.out_bias, 0.0);
}

}  // namespace

TEST_SUITE("relation") {
  TEST_CASE("unit layout") {
    Rng rng(1);
    const RelationModule m = build_relation_module(RelationVariant::conv1x1, 4, 2, 3, 5, rng);
    CHECK(m.units().size() == 12);
    for (std::size_t l = 0; l < 4; ++l)
      for (std::size_t mm = 0; mm < 4; ++mm) {
        if (l == mm) {
          CHECK_THROWS_AS(m.unit(l, mm), ContractError);
          continue;
        }
        CHECK(m.unit(l, mm).l == l);
        CHECK(m.unit(l, mm).m == mm);
      }
    CHECK(m.unit(0, 1).weights.node() != m.unit(1, 0).weights.node());
    CHECK(m.unit(1, 0).weights.shape() == Shape{3, 4, 1, 1});
    CHECK_THROWS_AS(build_relation_module(RelationVariant::conv1x1, 1, 2, 3, 5, rng), ContractError);
  }

  TEST_CASE("pairwise g shapes and channel averaging") {
    Rng rng(2);
    RelationModule m = build_relation_module(RelationVariant::conv1x1, 2, 2, 3, 0, rng);
    auto parcels = random_parcels(2, 2, 5, rng);
    CHECK(pairwise_g(parcels[0], parcels[1], m.unit(0, 1)).shape() == Shape{3, 5, 5});

    fill(m.unit(0, 1).weights, 1.0 / 4.0);
    fill(m.unit(0, 1).bias, 0.0);
    const AttentionalParcel a{0, Tensor::full({2, 5, 5}, 0.3), {}}, b{1, Tensor::full({2, 5, 5}, 0.9), {}};
    const Tensor g = pairwise_g(a, b, m.unit(0, 1));
    for (double v : g.data()) CHECK(v == doctest::Approx(0.6).epsilon(1e-15));

    CHECK_THROWS_AS(pairwise_g(a, AttentionalParcel{1, Tensor::zeros({2, 4, 4}), {}}, m.unit(0, 1)), DimensionError);
  }

  TEST_CASE("conv and mlp variants agree on 1x1 maps") {
    Rng rng(3);
    RelationModule conv = build_relation_module(RelationVariant::conv1x1, 2, 3, 4, 0, rng);
    RelationModule mlp = build_relation_module(RelationVariant::mlp, 2, 3, 4, 0, rng);
    const auto& cu = conv.unit(1, 0);
    auto& mu = mlp.unit(1, 0);
    std::copy(cu.weights.data().begin(), cu.weights.data().end(), mu.weights.mutable_data().begin());
    std::copy(cu.bias.data().begin(), cu.bias.data().end(), mu.bias.mutable_data().begin());
    const auto parcels = random_parcels(2, 3, 1, rng);
    const Tensor a = pairwise_g(parcels[1], parcels[0], cu), b = pairwise_g(parcels[1], parcels[0], mu);
    REQUIRE(a.numel() == b.numel());
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
  }

  TEST_CASE("L=2 aggregate uses only the single pair") {
    Rng rng(4);
    const RelationModule m = build_relation_module(RelationVariant::conv1x1, 2, 2, 3, 4, rng);
    const auto parcels = random_parcels(2, 2, 3, rng);
    const Tensor direct = head_logit(m.head(), pooled_relation(parcels[0], parcels[1], m.unit(0, 1)));
    CHECK(aggregate_logit(0, parcels, m).item() == direct.item());
  }

  TEST_CASE("order invariance is exact") {
    Rng rng(5);
    for (auto variant : {RelationVariant::conv1x1, RelationVariant::mlp}) {
      const RelationModule m = build_relation_module(variant, 5, 2, 4, 6, rng);
      const auto parcels = random_parcels(5, 2, 4, rng);
      for (std::size_t l = 0; l < 5; ++l) {
        std::vector<std::size_t> order;
        for (std::size_t j = 0; j < 5; ++j)
          if (j != l) order.push_back(j);
        const double base = aggregate_label(l, parcels, m).item();
        do {
          CHECK(aggregate_label(l, parcels, m, order).item() == base);
        } while (std::next_permutation(order.begin(), order.end()));
      }
      CHECK_THROWS_AS(aggregate_logit(0, parcels, m, std::vector<std::size_t>{1, 1, 2, 3}), ContractError);
    }
  }

  TEST_CASE("GAP and sum commute for the conv variant") {
    Rng rng(6);
    const RelationModule m = build_relation_module(RelationVariant::conv1x1, 4, 3, 5, 0, rng);
    const auto parcels = random_parcels(4, 3, 5, rng);
    for (std::size_t l = 0; l < 4; ++l) {
      std::vector<Tensor> maps, pooled;
      for (std::size_t j = 0; j < 4; ++j) {
        if (j == l) continue;
        maps.push_back(pairwise_g(parcels[l], parcels[j], m.unit(l, j)));
        pooled.push_back(global_avg_pool(maps.back()));
      }
      const Tensor a = global_avg_pool(add_all(maps)), b = add_all(pooled);
      for (std::size_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
    }
  }

  TEST_CASE("zero module gives one half everywhere") {
    Rng rng(7);
    for (auto variant : {RelationVariant::conv1x1, RelationVariant::mlp}) {
      RelationModule m = build_relation_module(variant, 4, 2, 3, 5, rng);
      zero_module(m);
      std::vector<AttentionalParcel> zeros;
      for (std::size_t l = 0; l < 4; ++l) zeros.push_back({l, Tensor::zeros({2, 3, 3}), {}});
      const Tensor at_zero = forward_all(zeros, m), at_random = forward_all(random_parcels(4, 2, 3, rng), m);
      for (double p : at_zero.data()) CHECK(p == 0.5);
      for (double p : at_random.data()) CHECK(p == 0.5);
    }
  }

  TEST_CASE("outputs lie in (0,1)") {
    Rng rng(8);
    const RelationModule m = build_relation_module(RelationVariant::conv1x1, 6, 2, 4, 8, rng);
    const Tensor p = forward_all(random_parcels(6, 2, 4, rng), m);
    CHECK(p.numel() == 6);
    for (double v : p.data()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }

  TEST_CASE("zeroing one unit only changes its own label") {
    Rng rng(9);
    for (auto variant : {RelationVariant::conv1x1, RelationVariant::mlp}) {
      RelationModule m = build_relation_module(variant, 4, 2, 3, 5, rng);
      for (auto& u : m.units()) fill(u.bias, 0.2);
      const auto parcels = random_parcels(4, 2, 3, rng);
      const Tensor before = forward_all(parcels, m);
      const RelationMatrix rm_before = relation_matrix(parcels, m);
      fill(m.unit(1, 3).weights, 0.0);
      fill(m.unit(1, 3).bias, 0.0);
      const Tensor after = forward_all(parcels, m);
      const RelationMatrix rm_after = relation_matrix(parcels, m);
      for (std::size_t j = 0; j < 4; ++j) {
        if (j == 1) {
          CHECK(after[j] != before[j]);
        } else {
          CHECK(after[j] == before[j]);
        }
        for (std::size_t k = 0; k < 4; ++k) {
          if (j == 1 && k == 3) {
            CHECK(*rm_after.at(j, k) != *rm_before.at(j, k));
          } else {
            CHECK(rm_after.at(j, k) == rm_before.at(j, k));
          }
        }
      }
    }
  }

  TEST_CASE("relabeling symmetry") {
    Rng rng(10);
    RelationModule m = build_relation_module(RelationVariant::conv1x1, 3, 2, 3, 4, rng);
    auto parcels = random_parcels(3, 2, 3, rng);
    const Tensor before = forward_all(parcels, m);
    // Swap labels 1 and 2: exchange parcel contents and the parameters of
    // every unit touching them.
    std::swap(parcels[1].maps, parcels[2].maps);
    auto swap_units = [&](std::size_t a1, std::size_t b1, std::size_t a2, std::size_t b2) {
      std::swap(m.unit(a1, b1).weights, m.unit(a2, b2).weights);
      std::swap(m.unit(a1, b1).bias, m.unit(a2, b2).bias);
    };
    swap_units(1, 2, 2, 1);
    swap_units(1, 0, 2, 0);
    swap_units(0, 1, 0, 2);
    const Tensor after = forward_all(parcels, m);
    CHECK(after[0] == doctest::Approx(before[0]).epsilon(1e-14));
    CHECK(after[1] == doctest::Approx(before[2]).epsilon(1e-14));
    CHECK(after[2] == doctest::Approx(before[1]).epsilon(1e-14));
  }

  TEST_CASE("relation matrix normalization and format") {
    using O = std::optional<double>;
    const auto n = normalize_rows({std::nullopt, O(2), O(4), O(6), O(1), std::nullopt, O(1), O(1), O(3), O(3), std::nullopt, O(3),
                                   O(0), O(5), O(10), std::nullopt},
                                  4);
    CHECK_FALSE(n[0].has_value());
    CHECK(*n[1] == 0.0);
    CHECK(*n[2] == 0.5);
    CHECK(*n[3] == 1.0);
    CHECK(*n[4] == 1.0);  // constant row
    const auto two = normalize_rows({std::nullopt, O(-3.0), O(7.0), std::nullopt}, 2);
    CHECK(*two[1] == 1.0);
    CHECK(*two[2] == 1.0);

    Rng rng(11);
    const RelationModule m = build_relation_module(RelationVariant::conv1x1, 3, 2, 3, 4, rng);
    const auto parcels = random_parcels(3, 2, 3, rng);
    const RelationMatrix rm = relation_matrix(parcels, m);
    CHECK(rm.size == 3);
    for (std::size_t l = 0; l < 3; ++l) {
      CHECK_FALSE(rm.at(l, l).has_value());
      for (std::size_t j = 0; j < 3; ++j)
        if (j != l) {
          const double expect = head_logit(m.head(), pooled_relation(parcels[l], parcels[j], m.unit(l, j))).item();
          CHECK(*rm.at(l, j) == expect);
        }
    }
    const std::string csv = format_relation_matrix(rm.normalized, 3);
    const auto lines = std::count(csv.begin(), csv.end(), '\n');
    CHECK(lines == 3);
    CHECK(csv.rfind(",", 0) == 0);  // first cell of row 0 is the empty diagonal
    const std::string first_line = csv.substr(0, csv.find('\n'));
    CHECK(std::count(first_line.begin(), first_line.end(), ',') == 2);
  }
}
