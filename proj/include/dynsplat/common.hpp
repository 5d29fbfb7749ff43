// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynsplat {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input that violates a documented precondition. The CLI maps this to exit code 2.
class ValidationError : public Error {
public:
  using Error::Error;
};

class NonPositiveDepth : public ValidationError {
public:
  NonPositiveDepth() : ValidationError("point has non-positive camera depth") {}
};

class DegenerateRotation6D : public ValidationError {
public:
  DegenerateRotation6D() : ValidationError("degenerate 6D rotation (zero or parallel columns)") {}
};

class MismatchedForward : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class InsufficientMatches : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class DegenerateConfiguration : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class ZeroDenominator : public ValidationError {
public:
  ZeroDenominator() : ValidationError("Sampson error denominator vanishes") {}
};

class EmptyStaticRegion : public ValidationError {
public:
  EmptyStaticRegion() : ValidationError("no static pixels available for initialization") {}
};

class InsufficientTracks : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class MissingChannel : public ValidationError {
public:
  explicit MissingChannel(const std::string &what) : ValidationError("missing channel: " + what), channel(what) {}
  std::string channel;
};

class ShapeMismatch : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class BadMagic : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// Dense row-major H x W x C raster.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T &at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const T &at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool empty() const { return data.empty(); }
  bool same_shape(int w, int h) const { return width == w && height == h; }
  template <typename U>
  bool same_shape(const Image<U> &o) const {
    return width == o.width && height == o.height;
  }
};

using ImageD = Image<double>;
using Mask = Image<std::uint8_t>;

} // namespace dynsplat
