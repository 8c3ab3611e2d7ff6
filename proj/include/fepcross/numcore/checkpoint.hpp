// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "fepcross/numcore/tensor.hpp"

namespace fepcross::numcore {

/// Name-ordered tensor collection; ordering fixes the on-disk layout.
using NamedTensors = std::map<std::string, Tensor<float>>;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes `header.json` (array of {name, shape, dtype, offset, length}, offsets
/// and lengths in bytes) and `weights.bin` (little-endian f32) into `dir`.
void save_checkpoint(const std::filesystem::path& dir, const NamedTensors& tensors);

NamedTensors load_checkpoint(const std::filesystem::path& dir);

}  // namespace fepcross::numcore
