#include "relparcel/relation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "relparcel/backbone.hpp"
#include "relparcel/errors.hpp"
#include "relparcel/ops.hpp"

namespace relparcel {

std::string to_string(RelationVariant v) {
  return v == RelationVariant::conv1x1 ? "conv1x1" : "mlp";
}

RelationVariant relation_variant_from(const std::string& name) {
  if (name == "conv1x1" || name == "conv") return RelationVariant::conv1x1;
  if (name == "mlp") return RelationVariant::mlp;
  throw ConfigError("unknown relation variant '" + name + "' (expected conv1x1 or mlp)");
}

RelationModule::RelationModule(RelationVariant variant, std::size_t num_labels,
                               std::vector<PairwiseUnit> units, RelationHead head)
    : variant_(variant), num_labels_(num_labels), units_(std::move(units)), head_(std::move(head)) {
  if (num_labels_ < 2) throw ContractError("relation module needs at least 2 labels");
  if (units_.size() != num_labels_ * (num_labels_ - 1)) {
    throw DimensionError("relation module needs " + std::to_string(num_labels_ * (num_labels_ - 1)) +
                         " units, got " + std::to_string(units_.size()));
  }
}

std::size_t RelationModule::relation_channels() const {
  return units_.empty() ? 0 : units_.front().bias.numel();
}

std::size_t RelationModule::unit_index(std::size_t l, std::size_t m, std::size_t num_labels) {
  if (l == m || l >= num_labels || m >= num_labels) {
    throw ContractError("no relation unit for pair (" + std::to_string(l) + "," + std::to_string(m) + ")");
  }
  return l * (num_labels - 1) + (m < l ? m : m - 1);
}

const PairwiseUnit& RelationModule::unit(std::size_t l, std::size_t m) const {
  return units_[unit_index(l, m, num_labels_)];
}

PairwiseUnit& RelationModule::unit(std::size_t l, std::size_t m) {
  return units_[unit_index(l, m, num_labels_)];
}

RelationModule build_relation_module(RelationVariant variant, std::size_t num_labels,
                                     std::size_t parcel_channels, std::size_t relation_channels,
                                     std::size_t head_hidden, Rng& rng) {
  if (num_labels < 2) throw ContractError("relation module needs at least 2 labels");
  if (relation_channels == 0) throw ConfigError("relation_channels must be positive");
  const std::size_t in = 2 * parcel_channels, d = relation_channels;
  std::vector<PairwiseUnit> units;
  for (std::size_t l = 0; l < num_labels; ++l) {
    for (std::size_t m = 0; m < num_labels; ++m) {
      if (l == m) continue;
      PairwiseUnit u{l, m, variant, {}, Tensor::zeros({d}, true)};
      u.weights = variant == RelationVariant::conv1x1 ? glorot_uniform({d, in, 1, 1}, in, d, rng)
                                                      : glorot_uniform({d, in}, in, d, rng);
      units.push_back(std::move(u));
    }
  }
  RelationHead head;
  if (head_hidden > 0) {
    head.hidden_weights = glorot_uniform({head_hidden, d}, d, head_hidden, rng);
    head.hidden_bias = Tensor::zeros({head_hidden}, true);
    head.out_weights = glorot_uniform({1, head_hidden}, head_hidden, 1, rng);
  } else {
    head.out_weights = glorot_uniform({1, d}, d, 1, rng);
  }
  head.out_bias = Tensor::zeros({1}, true);
  return RelationModule(variant, num_labels, std::move(units), std::move(head));
}

Tensor pairwise_g(const AttentionalParcel& a_l, const AttentionalParcel& a_m, const PairwiseUnit& unit) {
  if (a_l.label != unit.l || a_m.label != unit.m) {
    throw ContractError("unit (" + std::to_string(unit.l) + "," + std::to_string(unit.m) +
                        ") applied to parcels (" + std::to_string(a_l.label) + "," +
                        std::to_string(a_m.label) + ")");
  }
  if (a_l.maps.shape() != a_m.maps.shape()) {
    throw DimensionError("pairwise_g: parcel shapes " + shape_str(a_l.maps.shape()) + " vs " +
                         shape_str(a_m.maps.shape()));
  }
  const Tensor pair = concat_channels(a_l.maps, a_m.maps);
  if (unit.variant == RelationVariant::conv1x1) {
    return relu(conv2d(pair, unit.weights, unit.bias));
  }
  return relu(fully_connected(global_avg_pool(pair), unit.weights, unit.bias));
}

Tensor pooled_relation(const AttentionalParcel& a_l, const AttentionalParcel& a_m, const PairwiseUnit& unit) {
  Tensor g = pairwise_g(a_l, a_m, unit);
  return unit.variant == RelationVariant::conv1x1 ? global_avg_pool(g) : g;
}

Tensor head_logit(const RelationHead& head, const Tensor& features) {
  Tensor x = features;
  if (head.hidden_weights.defined()) x = relu(fully_connected(x, head.hidden_weights, head.hidden_bias));
  return fully_connected(x, head.out_weights, head.out_bias);
}

Tensor aggregate_logit(std::size_t l, std::span<const AttentionalParcel> parcels,
                       const RelationModule& module, std::span<const std::size_t> order) {
  const std::size_t n = parcels.size();
  if (n < 2) throw ContractError("aggregate_label needs at least 2 labels");
  if (n != module.num_labels()) {
    throw DimensionError("got " + std::to_string(n) + " parcels for a " +
                         std::to_string(module.num_labels()) + "-label relation module");
  }
  std::vector<std::size_t> ms;
  if (order.empty()) {
    for (std::size_t m = 0; m < n; ++m) {
      if (m != l) ms.push_back(m);
    }
  } else {
    ms.assign(order.begin(), order.end());
    std::vector<std::size_t> sorted = ms;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> expected;
    for (std::size_t m = 0; m < n; ++m) {
      if (m != l) expected.push_back(m);
    }
    if (sorted != expected) throw ContractError("aggregate order must list every m != l exactly once");
  }
  std::vector<Tensor> slots(n);
  for (auto m : ms) slots[m] = pooled_relation(parcels[l], parcels[m], module.unit(l, m));
  std::vector<Tensor> terms;
  terms.reserve(n - 1);
  for (auto& t : slots) {
    if (t.defined()) terms.push_back(std::move(t));
  }
  return head_logit(module.head(), add_all(terms));
}

Tensor aggregate_label(std::size_t l, std::span<const AttentionalParcel> parcels,
                       const RelationModule& module, std::span<const std::size_t> order) {
  return sigmoid(aggregate_logit(l, parcels, module, order));
}

Tensor forward_all(std::span<const AttentionalParcel> parcels, const RelationModule& module) {
  std::vector<Tensor> logits;
  logits.reserve(parcels.size());
  for (std::size_t l = 0; l < parcels.size(); ++l) logits.push_back(aggregate_logit(l, parcels, module));
  return sigmoid(concat(logits));
}

std::vector<std::optional<double>> normalize_rows(const std::vector<std::optional<double>>& raw,
                                                  std::size_t size) {
  std::vector<std::optional<double>> out(raw.size());
  for (std::size_t r = 0; r < size; ++r) {
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (std::size_t c = 0; c < size; ++c) {
      const auto& v = raw[r * size + c];
      if (!v) continue;
      lo = any ? std::min(lo, *v) : *v;
      hi = any ? std::max(hi, *v) : *v;
      any = true;
    }
    for (std::size_t c = 0; c < size; ++c) {
      const auto& v = raw[r * size + c];
      if (!v) continue;
      out[r * size + c] = hi > lo ? (*v - lo) / (hi - lo) : 1.0;
    }
  }
  return out;
}

RelationMatrix relation_matrix(std::span<const AttentionalParcel> parcels, const RelationModule& module) {
  const std::size_t n = parcels.size();
  if (n < 2) throw ContractError("relation_matrix needs at least 2 labels");
  RelationMatrix rm;
  rm.size = n;
  rm.raw.assign(n * n, std::nullopt);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t m = 0; m < n; ++m) {
      if (l == m) continue;
      const Tensor features = pooled_relation(parcels[l], parcels[m], module.unit(l, m)).detach();
      rm.raw[l * n + m] = head_logit(module.head(), features).item();
    }
  }
  rm.normalized = normalize_rows(rm.raw, n);
  return rm;
}

std::string format_relation_matrix(const std::vector<std::optional<double>>& values, std::size_t size) {
  std::string out;
  char buf[64];
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      if (c) out += ',';
      if (const auto& v = values[r * size + c]) {
        std::snprintf(buf, sizeof buf, "%.6f", *v);
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace relparcel
