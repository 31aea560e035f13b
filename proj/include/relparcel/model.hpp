#ifndef RELPARCEL_MODEL_HPP
#define RELPARCEL_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "relparcel/attention.hpp"
#include "relparcel/backbone.hpp"
#include "relparcel/parcels.hpp"
#include "relparcel/relation.hpp"

namespace relparcel {

/// Which classifier sits on top of the attentional parcels.
enum class HeadKind {
  relation,     // pairwise relation units + shared relation head
  independent,  // per-label GAP + MLP, no label interaction
};

std::string to_string(HeadKind kind);
HeadKind head_kind_from(const std::string& name);

struct ModelConfig {
  BackboneConfig backbone;
  std::size_t num_labels = 6;
  std::size_t parcel_channels = 4;    // K
  std::size_t relation_channels = 8;  // D
  std::size_t head_hidden = 16;
  RelationVariant relation_variant = RelationVariant::conv1x1;
  HeadKind head = HeadKind::relation;

  void validate() const;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

struct ModelOutputs {
  std::vector<FeatureParcel> parcels;
  std::vector<AttentionalParcel> attentional;
  Tensor probabilities;  // [L]
};

class Model {
 public:
  Model() = default;
  Model(ModelConfig config, Backbone backbone, ParcelLayer parcels, std::vector<Localizer> localizers,
        RelationModule relation, std::vector<RelationHead> independent);

  const ModelConfig& config() const { return config_; }
  std::size_t num_labels() const { return config_.num_labels; }

  ModelOutputs forward(const Tensor& image) const;
  /// Probabilities as plain values.
  std::vector<double> predict(const Tensor& image) const;

  /// Every trainable tensor with a stable name, in a fixed order.
  std::vector<NamedParameter> parameters() const;
  std::size_t parameter_count() const;

  const Backbone& backbone() const { return backbone_; }
  const ParcelLayer& parcel_layer() const { return parcels_; }
  const std::vector<Localizer>& localizers() const { return localizers_; }
  const RelationModule& relation() const { return relation_; }
  RelationModule& relation() { return relation_; }

 private:
  ModelConfig config_;
  Backbone backbone_;
  ParcelLayer parcels_;
  std::vector<Localizer> localizers_;
  RelationModule relation_;
  std::vector<RelationHead> independent_;
};

/// All initializers draw from named sub-streams of `seed`.
Model build_model(const ModelConfig& config, std::uint64_t seed);

/// Deep copy: separate parameter storage.
Model clone_model(const Model& model);

}  // namespace relparcel

#endif  // RELPARCEL_MODEL_HPP
