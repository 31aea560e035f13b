#ifndef RELPARCEL_RELATION_HPP
#define RELPARCEL_RELATION_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relparcel/attention.hpp"
#include "relparcel/rng.hpp"
#include "relparcel/tensor.hpp"

namespace relparcel {

/// How a pairwise unit reads the concatenated parcel pair.
enum class RelationVariant {
  conv1x1,  // relu(1x1 conv) over [2K,H,W], keeps spatial layout
  mlp,      // relu(FC(GAP(.))) over the pooled 2K-vector
};

std::string to_string(RelationVariant v);
RelationVariant relation_variant_from(const std::string& name);

/// Learnable relation unit for one ordered label pair (l, m), l != m.
struct PairwiseUnit {
  std::size_t l = 0;
  std::size_t m = 0;
  RelationVariant variant = RelationVariant::conv1x1;
  Tensor weights;  // conv1x1: [D, 2K, 1, 1]; mlp: [D, 2K]
  Tensor bias;     // [D]
};

/// Shared map from a D-vector of relation features to one pre-sigmoid score.
/// hidden == 0 gives a single linear layer.
struct RelationHead {
  Tensor hidden_weights;  // [H, D]   (undefined when hidden == 0)
  Tensor hidden_bias;     // [H]
  Tensor out_weights;     // [1, H] or [1, D]
  Tensor out_bias;        // [1]
};

class RelationModule {
 public:
  RelationModule() = default;
  RelationModule(RelationVariant variant, std::size_t num_labels, std::vector<PairwiseUnit> units,
                 RelationHead head);

  RelationVariant variant() const { return variant_; }
  std::size_t num_labels() const { return num_labels_; }
  std::size_t relation_channels() const;

  /// Storage slot of unit (l, m): l*(L-1) + (m < l ? m : m-1).
  static std::size_t unit_index(std::size_t l, std::size_t m, std::size_t num_labels);
  const PairwiseUnit& unit(std::size_t l, std::size_t m) const;
  PairwiseUnit& unit(std::size_t l, std::size_t m);
  const std::vector<PairwiseUnit>& units() const { return units_; }
  std::vector<PairwiseUnit>& units() { return units_; }
  const RelationHead& head() const { return head_; }
  RelationHead& head() { return head_; }

 private:
  RelationVariant variant_ = RelationVariant::conv1x1;
  std::size_t num_labels_ = 0;
  std::vector<PairwiseUnit> units_;
  RelationHead head_;
};

/// Glorot-uniform units (one per ordered pair) and head.
RelationModule build_relation_module(RelationVariant variant, std::size_t num_labels,
                                     std::size_t parcel_channels, std::size_t relation_channels,
                                     std::size_t head_hidden, Rng& rng);

/// g_lm(A_l, A_m): conv1x1 -> [D,H,W], mlp -> [D].
Tensor pairwise_g(const AttentionalParcel& a_l, const AttentionalParcel& a_m, const PairwiseUnit& unit);

/// g_lm reduced to a D-vector (GAP for the conv variant, identity for mlp).
Tensor pooled_relation(const AttentionalParcel& a_l, const AttentionalParcel& a_m, const PairwiseUnit& unit);

/// Head output before the sigmoid, shape [1].
Tensor head_logit(const RelationHead& head, const Tensor& features);

/// Pre-sigmoid score of label l: f(sum_{m != l} pooled g_lm).
/// `order` lists the m's in evaluation order (default ascending); the sum is
/// always accumulated in ascending m so the result does not depend on it.
Tensor aggregate_logit(std::size_t l, std::span<const AttentionalParcel> parcels,
                       const RelationModule& module, std::span<const std::size_t> order = {});

/// sigmoid(aggregate_logit), shape [1].
Tensor aggregate_label(std::size_t l, std::span<const AttentionalParcel> parcels,
                       const RelationModule& module, std::span<const std::size_t> order = {});

/// Per-label probabilities [L].
Tensor forward_all(std::span<const AttentionalParcel> parcels, const RelationModule& module);

/// L x L pairwise scores f(g_lm(A_l, A_m)) (pre-sigmoid) with a null diagonal,
/// plus the row-wise min-max normalized copy.
struct RelationMatrix {
  std::size_t size = 0;
  std::vector<std::optional<double>> raw;
  std::vector<std::optional<double>> normalized;

  const std::optional<double>& at(std::size_t l, std::size_t m) const { return raw[l * size + m]; }
  const std::optional<double>& normalized_at(std::size_t l, std::size_t m) const {
    return normalized[l * size + m];
  }
};

/// Min-max scales each row over its non-null entries; single-entry and
/// constant rows map to 1.0.
std::vector<std::optional<double>> normalize_rows(const std::vector<std::optional<double>>& raw,
                                                  std::size_t size);

RelationMatrix relation_matrix(std::span<const AttentionalParcel> parcels, const RelationModule& module);

/// CSV grid: diagonal as an empty field, values with 6 decimals.
std::string format_relation_matrix(const std::vector<std::optional<double>>& values, std::size_t size);

}  // namespace relparcel

#endif  // RELPARCEL_RELATION_HPP
