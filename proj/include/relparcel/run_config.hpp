#ifndef RELPARCEL_RUN_CONFIG_HPP
#define RELPARCEL_RUN_CONFIG_HPP

#include <string>

#include "relparcel/config.hpp"
#include "relparcel/data.hpp"
#include "relparcel/model.hpp"
#include "relparcel/training.hpp"

namespace relparcel {

/// Merged [backbone], [model] and [train] sections.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  void validate() const {
    model.validate();
    train.validate();
  }
};

/// Missing keys keep their defaults; unknown keys in known sections are errors.
RunConfig run_config_from(const ConfigDocument& doc, RunConfig defaults = {});
RunConfig load_run_config(const std::string& path, RunConfig defaults = {});
ConfigDocument to_config(const RunConfig& config);

/// Label count and input shape default to the dataset's; an empty path means
/// no config file. Throws ConfigError when the config disagrees with the data.
RunConfig run_config_for(const Dataset& ds, const std::string& path);

}  // namespace relparcel

#endif  // RELPARCEL_RUN_CONFIG_HPP
