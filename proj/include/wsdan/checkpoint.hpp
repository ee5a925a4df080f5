#pragma once

#include <map>
#include <string>
#include <vector>

#include "wsdan/tensor.hpp"

namespace wsdan {

/// On-disk model snapshot. Binary format: magic "WSDC", u32le version,
/// u32le epoch, length-prefixed config text, length-prefixed RNG state,
/// u32le tensor count, then per tensor: u32le name length, name bytes,
/// u32le rank, rank u32le dims, f64le values row-major. Load followed by
/// save reproduces the bytes exactly.
struct Checkpoint {
  uint32_t epoch = 0;
  std::string config_text;  // key = value lines, the run's echoed config
  std::string rng_state;
  std::vector<std::pair<std::string, Tensor>> tensors;

  Tensor find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace wsdan
