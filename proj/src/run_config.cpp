#include "relparcel/run_config.hpp"

#include <algorithm>
#include <set>

#include "relparcel/errors.hpp"

namespace relparcel {

namespace {

std::size_t to_size(const ConfigValue& v, const std::string& key) {
  const auto i = v.as_int();
  if (i < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<std::size_t>(i);
}

void reject_unknown(const ConfigDocument& doc, const std::string& section, const std::set<std::string>& known) {
  for (const auto& k : doc.keys(section)) {
    if (!known.count(k)) throw ConfigError("unknown config key [" + section + "] " + k);
  }
}

ConfigValue::Array sizes(const std::vector<std::size_t>& v) {
  ConfigValue::Array out;
  for (auto x : v) out.push_back({static_cast<std::int64_t>(x)});
  return out;
}

}  // namespace

RunConfig run_config_from(const ConfigDocument& doc, RunConfig cfg) {
  reject_unknown(doc, "backbone",
                 {"input_size", "input_channels", "block_channels", "pool_after_block", "dilation_last_block",
                  "drop_last_pool"});
  reject_unknown(doc, "model",
                 {"num_labels", "parcel_channels", "relation_channels", "head_hidden", "relation_variant", "head"});
  reject_unknown(doc, "train",
                 {"lr", "batch_size", "max_epochs", "patience", "decay_factor", "min_lr", "decay_patience", "val_fraction",
                  "threshold", "seed"});

  auto& bb = cfg.model.backbone;
  auto size_key = [&doc](const char* section, const char* key, std::size_t& out) {
    if (doc.has(section, key)) out = to_size(doc.get(section, key), std::string(section) + "." + key);
  };
  size_key("backbone", "input_size", bb.input_size);
  size_key("backbone", "input_channels", bb.input_channels);
  size_key("backbone", "dilation_last_block", bb.dilation_last_block);
  bb.drop_last_pool = doc.get_bool("backbone", "drop_last_pool", bb.drop_last_pool);
  if (doc.has("backbone", "block_channels")) {
    bb.block_channels.clear();
    for (const auto& v : doc.get("backbone", "block_channels").as_array()) {
      bb.block_channels.push_back(to_size(v, "backbone.block_channels"));
    }
    if (!doc.has("backbone", "pool_after_block")) {
      bb.pool_after_block.assign(bb.block_channels.size(), false);
      if (!bb.pool_after_block.empty()) bb.pool_after_block.front() = true;
    }
  }
  if (doc.has("backbone", "pool_after_block")) {
    bb.pool_after_block.clear();
    for (const auto& v : doc.get("backbone", "pool_after_block").as_array()) bb.pool_after_block.push_back(v.as_bool());
  }

  size_key("model", "num_labels", cfg.model.num_labels);
  size_key("model", "parcel_channels", cfg.model.parcel_channels);
  size_key("model", "relation_channels", cfg.model.relation_channels);
  size_key("model", "head_hidden", cfg.model.head_hidden);
  if (doc.has("model", "relation_variant")) {
    cfg.model.relation_variant = relation_variant_from(doc.get("model", "relation_variant").as_string());
  }
  if (doc.has("model", "head")) cfg.model.head = head_kind_from(doc.get("model", "head").as_string());

  auto& t = cfg.train;
  t.lr = doc.get_double("train", "lr", t.lr);
  size_key("train", "batch_size", t.batch_size);
  size_key("train", "max_epochs", t.max_epochs);
  size_key("train", "patience", t.patience);
  t.decay_factor = doc.get_double("train", "decay_factor", t.decay_factor);
  t.min_lr = doc.get_double("train", "min_lr", t.min_lr);
  size_key("train", "decay_patience", t.decay_patience);
  t.val_fraction = doc.get_double("train", "val_fraction", t.val_fraction);
  t.threshold = doc.get_double("train", "threshold", t.threshold);
  if (doc.has("train", "seed")) t.seed = static_cast<std::uint64_t>(doc.get("train", "seed").as_int());
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path, RunConfig defaults) {
  return run_config_from(ConfigDocument::load(path), std::move(defaults));
}

ConfigDocument to_config(const RunConfig& cfg) {
  ConfigDocument doc;
  const auto& bb = cfg.model.backbone;
  doc.set("backbone", "input_size", {static_cast<std::int64_t>(bb.input_size)});
  doc.set("backbone", "input_channels", {static_cast<std::int64_t>(bb.input_channels)});
  doc.set("backbone", "block_channels", {sizes(bb.block_channels)});
  ConfigValue::Array pools;
  for (bool b : bb.pool_after_block) pools.push_back({b});
  doc.set("backbone", "pool_after_block", {pools});
  doc.set("backbone", "dilation_last_block", {static_cast<std::int64_t>(bb.dilation_last_block)});
  doc.set("backbone", "drop_last_pool", {bb.drop_last_pool});

  doc.set("model", "num_labels", {static_cast<std::int64_t>(cfg.model.num_labels)});
  doc.set("model", "parcel_channels", {static_cast<std::int64_t>(cfg.model.parcel_channels)});
  doc.set("model", "relation_channels", {static_cast<std::int64_t>(cfg.model.relation_channels)});
  doc.set("model", "head_hidden", {static_cast<std::int64_t>(cfg.model.head_hidden)});
  doc.set("model", "relation_variant", {to_string(cfg.model.relation_variant)});
  doc.set("model", "head", {to_string(cfg.model.head)});

  const auto& t = cfg.train;
  doc.set("train", "lr", {t.lr});
  doc.set("train", "batch_size", {static_cast<std::int64_t>(t.batch_size)});
  doc.set("train", "max_epochs", {static_cast<std::int64_t>(t.max_epochs)});
  doc.set("train", "patience", {static_cast<std::int64_t>(t.patience)});
  doc.set("train", "decay_factor", {t.decay_factor});
  doc.set("train", "min_lr", {t.min_lr});
  doc.set("train", "decay_patience", {static_cast<std::int64_t>(t.decay_patience)});
  doc.set("train", "val_fraction", {t.val_fraction});
  doc.set("train", "threshold", {t.threshold});
  doc.set("train", "seed", {static_cast<std::int64_t>(t.seed)});
  return doc;
}

RunConfig run_config_for(const Dataset& ds, const std::string& path) {
  RunConfig defaults;
  defaults.model.num_labels = ds.num_labels();
  defaults.model.backbone.input_size = ds.image_size;
  defaults.model.backbone.input_channels = ds.channels;
  RunConfig cfg = path.empty() ? defaults : load_run_config(path, defaults);
  if (cfg.model.num_labels != ds.num_labels()) {
    throw ConfigError("config num_labels = " + std::to_string(cfg.model.num_labels) + " but dataset has " +
                      std::to_string(ds.num_labels()) + " labels");
  }
  if (cfg.model.backbone.input_size != ds.image_size || cfg.model.backbone.input_channels != ds.channels) {
    throw ConfigError("config input shape does not match dataset images");
  }
  return cfg;
}

}  // namespace relparcel
