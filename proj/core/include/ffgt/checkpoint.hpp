#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ffgt/model.hpp"
#include "ffgt/tensor.hpp"

namespace ffgt {

// Parameter checkpoint container (little-endian throughout):
//   magic "FFGTCKP1" | u32 record count
//   per record: u32 name length | name bytes | u32 rank | u64 dims[rank]
//               | f64 values[prod(dims)]
// Round-trips bit-exactly.

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& records);

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path);

// Loads into an existing parameter registry, validating names, order and
// shapes. Throws IoError on any mismatch.
void load_checkpoint_into(const std::string& path, std::vector<ParamRef> refs);

}  // namespace ffgt
