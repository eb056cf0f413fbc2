#pragma once

#include <string>
#include <vector>

#include "jarn/nn.hpp"

namespace jarn::checkpoint {

// Versioned binary container of one or more parameter stores: per store the
// owner tag, input shape, network spec as text, and raw row-major doubles per
// named tensor. Little-endian; load/save round-trips bit-exactly.
struct Checkpoint {
  std::string meta;  // resolved-config echo, "key=value" lines
  std::vector<nn::ParameterStore> stores;

  const nn::ParameterStore& store(nn::Owner owner) const;
  bool has(nn::Owner owner) const;
};

void save(const Checkpoint& ckpt, const std::string& path);
Checkpoint load(const std::string& path);

// Flat named-tensor dump (saliency raw exports); same encoding, no specs.
void save_tensors(const std::vector<nn::Param>& tensors, const std::string& path);
std::vector<nn::Param> load_tensors(const std::string& path);

}  // namespace jarn::checkpoint
