#include "relparcel/model.hpp"

#include "relparcel/errors.hpp"
#include "relparcel/ops.hpp"

namespace relparcel {

std::string to_string(HeadKind kind) {
  return kind == HeadKind::relation ? "relation" : "independent";
}

HeadKind head_kind_from(const std::string& name) {
  if (name == "relation") return HeadKind::relation;
  if (name == "independent") return HeadKind::independent;
  throw ConfigError("unknown head '" + name + "' (expected relation or independent)");
}

void ModelConfig::validate() const {
  backbone.validate();
  if (num_labels < 2) throw ConfigError("num_labels must be at least 2");
  if (parcel_channels == 0) throw ConfigError("parcel_channels must be positive");
  if (relation_channels == 0) throw ConfigError("relation_channels must be positive");
}

Model::Model(ModelConfig config, Backbone backbone, ParcelLayer parcels, std::vector<Localizer> localizers,
             RelationModule relation, std::vector<RelationHead> independent)
    : config_(std::move(config)),
      backbone_(std::move(backbone)),
      parcels_(std::move(parcels)),
      localizers_(std::move(localizers)),
      relation_(std::move(relation)),
      independent_(std::move(independent)) {}

ModelOutputs Model::forward(const Tensor& image) const {
  ModelOutputs out;
  const Tensor features = backbone_forward(backbone_, image);
  out.parcels = parcel_forward(features, parcels_);
  out.attentional.reserve(out.parcels.size());
  for (std::size_t l = 0; l < out.parcels.size(); ++l) {
    out.attentional.push_back(extract_region(out.parcels[l], localizers_[l]));
  }
  if (config_.head == HeadKind::relation) {
    out.probabilities = forward_all(out.attentional, relation_);
  } else {
    std::vector<Tensor> logits;
    for (std::size_t l = 0; l < out.attentional.size(); ++l) {
      logits.push_back(head_logit(independent_[l], global_avg_pool(out.attentional[l].maps)));
    }
    out.probabilities = sigmoid(concat(logits));
  }
  return out;
}

std::vector<double> Model::predict(const Tensor& image) const {
  const Tensor probs = forward(image).probabilities;
  const auto p = probs.data();
  return {p.begin(), p.end()};
}

std::vector<NamedParameter> Model::parameters() const {
  std::vector<NamedParameter> ps;
  const auto& layers = backbone_.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    ps.push_back({"backbone." + std::to_string(i) + ".weight", layers[i].weights});
    ps.push_back({"backbone." + std::to_string(i) + ".bias", layers[i].bias});
  }
  ps.push_back({"parcels.weight", parcels_.weights});
  ps.push_back({"parcels.bias", parcels_.bias});
  for (std::size_t l = 0; l < localizers_.size(); ++l) {
    ps.push_back({"localizer." + std::to_string(l) + ".weight", localizers_[l].weights});
    ps.push_back({"localizer." + std::to_string(l) + ".bias", localizers_[l].bias});
  }
  auto add_head = [&ps](const std::string& prefix, const RelationHead& h) {
    if (h.hidden_weights.defined()) {
      ps.push_back({prefix + ".hidden.weight", h.hidden_weights});
      ps.push_back({prefix + ".hidden.bias", h.hidden_bias});
    }
    ps.push_back({prefix + ".out.weight", h.out_weights});
    ps.push_back({prefix + ".out.bias", h.out_bias});
  };
  if (config_.head == HeadKind::relation) {
    for (const auto& u : relation_.units()) {
      const std::string prefix = "relation.unit." + std::to_string(u.l) + "_" + std::to_string(u.m);
      ps.push_back({prefix + ".weight", u.weights});
      ps.push_back({prefix + ".bias", u.bias});
    }
    add_head("relation.head", relation_.head());
  } else {
    for (std::size_t l = 0; l < independent_.size(); ++l) add_head("independent." + std::to_string(l), independent_[l]);
  }
  return ps;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

Model build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Backbone backbone = build_backbone(config.backbone, mix_seed(seed, "init.backbone"));
  Rng parcel_rng = Rng::substream(seed, "init.parcels");
  ParcelLayer parcels = build_parcel_layer(config.backbone.output_channels(), config.num_labels,
                                           config.parcel_channels, parcel_rng);
  const std::size_t side = config.backbone.output_size();
  std::vector<Localizer> localizers;
  for (std::size_t l = 0; l < config.num_labels; ++l) {
    localizers.push_back(build_localizer(config.parcel_channels * side * side));
  }
  Rng head_rng = Rng::substream(seed, "init.relation");
  RelationModule relation;
  std::vector<RelationHead> independent;
  if (config.head == HeadKind::relation) {
    relation = build_relation_module(config.relation_variant, config.num_labels, config.parcel_channels,
                                     config.relation_channels, config.head_hidden, head_rng);
  } else {
    const std::size_t k = config.parcel_channels, h = config.head_hidden;
    for (std::size_t l = 0; l < config.num_labels; ++l) {
      RelationHead head;
      if (h > 0) {
        head.hidden_weights = glorot_uniform({h, k}, k, h, head_rng);
        head.hidden_bias = Tensor::zeros({h}, true);
        head.out_weights = glorot_uniform({1, h}, h, 1, head_rng);
      } else {
        head.out_weights = glorot_uniform({1, k}, k, 1, head_rng);
      }
      head.out_bias = Tensor::zeros({1}, true);
      independent.push_back(std::move(head));
    }
  }
  return Model(config, std::move(backbone), std::move(parcels), std::move(localizers), std::move(relation),
               std::move(independent));
}

Model clone_model(const Model& model) {
  Model copy = build_model(model.config(), 0);
  auto src = model.parameters();
  auto dst = copy.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto values = dst[i].tensor.mutable_data();
    const auto from = src[i].tensor.data();
    std::copy(from.begin(), from.end(), values.begin());
  }
  return copy;
}

}  // namespace relparcel
