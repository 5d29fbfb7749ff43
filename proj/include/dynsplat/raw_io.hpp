// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynsplat/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace dynsplat::io {

namespace fs = std::filesystem;

/// Writes to `path` via a temporary sibling and a rename, so readers never see partial files.
void atomic_write(const fs::path &path, std::string_view bytes);
std::string read_file(const fs::path &path);

/// Raw little-endian planes with a JSON sidecar {"width","height","channels","dtype"} next to them
/// (same stem, ".json" extension).
void write_f32(const fs::path &path, const ImageD &img);
ImageD read_f32(const fs::path &path);
void write_u16(const fs::path &path, const Image<std::uint16_t> &img);
Image<std::uint16_t> read_u16(const fs::path &path);
void write_u8(const fs::path &path, const Mask &img);
Mask read_u8(const fs::path &path);

/// Binary P6, 8 bits per channel. Values are clamped to [0, 1] and rounded.
void write_ppm(const fs::path &path, const ImageD &rgb);
ImageD read_ppm(const fs::path &path);
std::uint8_t quantize_unit(double v);

fs::path sidecar_path(const fs::path &raw);
std::string frame_name(int index, std::string_view ext);

} // namespace dynsplat::io
