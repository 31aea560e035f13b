#ifndef RELPARCEL_CHECKPOINT_HPP
#define RELPARCEL_CHECKPOINT_HPP

#include <cstdint>
#include <string>

#include "relparcel/model.hpp"
#include "relparcel/run_config.hpp"
#include "relparcel/training.hpp"

namespace relparcel {

/*
 Checkpoint container, all integers and reals little-endian:

   "RELPARCEL1"                      10-byte magic
   u32 version (1)
   u64 n, n bytes                    config snapshot (TOML text)
   u64 epoch
   u32 P, then P times:              parameters in Model::parameters() order
     u32 n, n bytes                  name
     u32 rank, rank x u64            shape
     numel x f64                     values
   f64 lr, f64 beta1, f64 beta2, f64 epsilon, u64 step
   u32 M, then M times:              optimizer moments (M = 0 before the first step)
     u64 n, n x f64 first, n x f64 second
*/
inline constexpr char kCheckpointMagic[] = "RELPARCEL1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  Model model;
  OptimizerState optimizer;
  std::uint64_t epoch = 0;
};

void save_checkpoint(const std::string& path, const RunConfig& config, const Model& model,
                     const OptimizerState& optimizer, std::uint64_t epoch);

/// Throws DataError on a bad magic, version, truncation or shape mismatch.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace relparcel

#endif  // RELPARCEL_CHECKPOINT_HPP
