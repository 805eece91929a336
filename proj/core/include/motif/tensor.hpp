// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "motif/error.hpp"

namespace motif {

struct Dims {
  int frames = 1;
  int height = 1;
  int width = 1;
  int channels = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(frames) * height * width * channels;
  }
  std::size_t frame_size() const {
    return static_cast<std::size_t>(height) * width * channels;
  }
  std::size_t positions() const {
    return static_cast<std::size_t>(frames) * height * width;
  }
  bool valid() const { return frames >= 1 && height >= 1 && width >= 1 && channels >= 1; }
  bool operator==(const Dims&) const = default;
  std::string str() const {
    return "(" + std::to_string(frames) + "," + std::to_string(height) + "," +
           std::to_string(width) + "," + std::to_string(channels) + ")";
  }
};

// Dense L x H x W x C array, channel-last, row-major.
template <class T>
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Dims dims, T fill = T(0)) : dims_(dims) {
    require(dims.valid(), "Tensor4: every dimension must be >= 1, got " + dims.str());
    data_.assign(dims.size(), fill);
  }
  Tensor4(Dims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    require(dims.valid(), "Tensor4: every dimension must be >= 1, got " + dims.str());
    require(data_.size() == dims.size(), "Tensor4: data length does not match dims");
  }

  const Dims& dims() const { return dims_; }
  int frames() const { return dims_.frames; }
  int height() const { return dims_.height; }
  int width() const { return dims_.width; }
  int channels() const { return dims_.channels; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(int l, int h, int w, int c = 0) const {
    return ((static_cast<std::size_t>(l) * dims_.height + h) * dims_.width + w) *
               dims_.channels + c;
  }
  T& at(int l, int h, int w, int c = 0) { return data_[index(l, h, w, c)]; }
  const T& at(int l, int h, int w, int c = 0) const { return data_[index(l, h, w, c)]; }

  std::span<T> frame(int l) {
    return std::span<T>(data_).subspan(static_cast<std::size_t>(l) * dims_.frame_size(),
                                       dims_.frame_size());
  }
  std::span<const T> frame(int l) const {
    return std::span<const T>(data_).subspan(static_cast<std::size_t>(l) * dims_.frame_size(),
                                             dims_.frame_size());
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }
  bool operator==(const Tensor4&) const = default;

 private:
  Dims dims_;
  std::vector<T> data_;
};

using Video = Tensor4<double>;
using Latent = Tensor4<double>;

inline void require_finite(const Tensor4<double>& t, const char* what) {
  if (!t.all_finite()) throw NumericError(std::string(what) + ": non-finite value");
}

}  // namespace motif
