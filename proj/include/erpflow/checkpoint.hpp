//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "erpflow/tensor.hpp"

namespace erpflow::ad {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensors {
  std::vector<std::pair<std::string, Tensor>> items;
};

// Container layout: magic "ERPTNSR1", u32 version, u32 count, per tensor
// (name, u32 rows, u32 cols, little-endian f64 data), trailing 64-bit
// checksum over everything before it.
std::string serialize_tensors(const NamedTensors& t);
NamedTensors deserialize_tensors(std::string_view blob);

void save_checkpoint(const std::string& path, const NamedTensors& t);
NamedTensors load_checkpoint(const std::string& path);

}  // namespace erpflow::ad
