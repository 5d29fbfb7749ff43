// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/raw_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "raw formats assume a little-endian host");

namespace dynsplat::io {

using nlohmann::json;

void atomic_write(const fs::path &path, std::string_view bytes) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error("cannot open for writing: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
      throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw MissingChannel(path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path sidecar_path(const fs::path &raw) {
  fs::path p = raw;
  p.replace_extension(".json");
  return p;
}

std::string frame_name(int index, std::string_view ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05d", index);
  return std::string(buf) + std::string(ext);
}

namespace {

void write_sidecar(const fs::path &raw, int w, int h, int c, const char *dtype) {
  json j = {{"width", w}, {"height", h}, {"channels", c}, {"dtype", dtype}};
  atomic_write(sidecar_path(raw), j.dump());
}

struct Shape {
  int w, h, c;
};

Shape read_sidecar(const fs::path &raw, const char *dtype, std::size_t elem_size, std::size_t byte_count) {
  const fs::path sc = sidecar_path(raw);
  json j;
  try {
    j = json::parse(read_file(sc));
  } catch (const json::exception &e) {
    throw ShapeMismatch("bad sidecar " + sc.string() + ": " + e.what());
  }
  Shape s{j.value("width", 0), j.value("height", 0), j.value("channels", 1)};
  if (j.contains("dtype") && j["dtype"].get<std::string>() != dtype)
    throw ShapeMismatch("dtype mismatch in " + sc.string());
  if (s.w <= 0 || s.h <= 0 || s.c <= 0 ||
      static_cast<std::size_t>(s.w) * s.h * s.c * elem_size != byte_count)
    throw ShapeMismatch("sidecar/raw size disagreement: " + raw.string());
  return s;
}

template <typename Raw, typename T>
void write_raw(const fs::path &path, const Image<T> &img, const char *dtype) {
  std::string bytes(img.data.size() * sizeof(Raw), '\0');
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const Raw v = static_cast<Raw>(img.data[i]);
    std::memcpy(bytes.data() + i * sizeof(Raw), &v, sizeof(Raw));
  }
  atomic_write(path, bytes);
  write_sidecar(path, img.width, img.height, img.channels, dtype);
}

template <typename Raw, typename T>
Image<T> read_raw(const fs::path &path, const char *dtype) {
  if (!fs::exists(path))
    throw MissingChannel(path.string());
  const std::string bytes = read_file(path);
  const Shape s = read_sidecar(path, dtype, sizeof(Raw), bytes.size());
  Image<T> img(s.w, s.h, s.c);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    Raw v;
    std::memcpy(&v, bytes.data() + i * sizeof(Raw), sizeof(Raw));
    img.data[i] = static_cast<T>(v);
  }
  return img;
}

} // namespace

void write_f32(const fs::path &path, const ImageD &img) { write_raw<float>(path, img, "float32"); }
ImageD read_f32(const fs::path &path) { return read_raw<float, double>(path, "float32"); }
void write_u16(const fs::path &path, const Image<std::uint16_t> &img) {
  write_raw<std::uint16_t>(path, img, "uint16");
}
Image<std::uint16_t> read_u16(const fs::path &path) { return read_raw<std::uint16_t, std::uint16_t>(path, "uint16"); }
void write_u8(const fs::path &path, const Mask &img) { write_raw<std::uint8_t>(path, img, "uint8"); }
Mask read_u8(const fs::path &path) { return read_raw<std::uint8_t, std::uint8_t>(path, "uint8"); }

std::uint8_t quantize_unit(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

void write_ppm(const fs::path &path, const ImageD &rgb) {
  if (rgb.channels != 3)
    throw ShapeMismatch("write_ppm expects 3 channels");
  std::string out = "P6\n" + std::to_string(rgb.width) + " " + std::to_string(rgb.height) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + rgb.data.size());
  for (std::size_t i = 0; i < rgb.data.size(); ++i)
    out[header + i] = static_cast<char>(quantize_unit(rgb.data[i]));
  atomic_write(path, out);
}

ImageD read_ppm(const fs::path &path) {
  if (!fs::exists(path))
    throw MissingChannel(path.string());
  const std::string bytes = read_file(path);
  std::istringstream in(bytes);
  std::string magic;
  in >> magic;
  if (magic != "P6")
    throw BadMagic("not a binary PPM: " + path.string());
  auto next_int = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      in >> std::ws;
    }
    int v = 0;
    in >> v;
    return v;
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  in.get();
  if (w <= 0 || h <= 0 || maxval != 255)
    throw ShapeMismatch("unsupported PPM header: " + path.string());
  const auto offset = static_cast<std::size_t>(in.tellg());
  if (bytes.size() < offset + static_cast<std::size_t>(w) * h * 3)
    throw ShapeMismatch("truncated PPM: " + path.string());
  ImageD img(w, h, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = static_cast<unsigned char>(bytes[offset + i]) / 255.0;
  return img;
}

} // namespace dynsplat::io
