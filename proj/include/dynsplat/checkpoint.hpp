// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynsplat/primitives.hpp"

#include <filesystem>
#include <string>

namespace dynsplat {

/// Checkpoint layout:
///   bytes 0..7   magic "RIGS0001"
///   bytes 8..15  little-endian uint64 header length N
///   N bytes      JSON header {counts, K, T, alpha_gate, fields: [{name, offset, count}]}
///   payload      little-endian float32 arrays, one per field, in header order;
///                `offset` is in bytes from the start of the payload.
std::string serialize_checkpoint(const GaussianSet &set);
GaussianSet deserialize_checkpoint(const std::string &bytes);

void save_checkpoint(const std::filesystem::path &path, const GaussianSet &set);
GaussianSet load_checkpoint(const std::filesystem::path &path);

} // namespace dynsplat
