#include "ccdf/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ccdf/errors.hpp"

namespace ccdf {

namespace {

void check_dims(int width, int height, int channels) {
  if (width < 1 || height < 1 || channels < 1) {
    throw ShapeError("invalid raster dimensions " + std::to_string(width) + "x" +
                     std::to_string(height) + "x" + std::to_string(channels));
  }
}

}  // namespace

ImageTensor::ImageTensor(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  check_dims(width, height, channels);
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

ImageTensor::ImageTensor(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  check_dims(width, height, channels);
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw ShapeError("raster payload has " + std::to_string(data_.size()) +
                     " values, expected W*H*C");
  }
}

std::span<double> ImageTensor::band(int c) {
  const std::size_t plane = static_cast<std::size_t>(width_) * height_;
  return std::span<double>(data_).subspan(c * plane, plane);
}

std::span<const double> ImageTensor::band(int c) const {
  const std::size_t plane = static_cast<std::size_t>(width_) * height_;
  return std::span<const double>(data_).subspan(c * plane, plane);
}

bool ImageTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

ChangeMask::ChangeMask(int width, int height, double fill)
    : width_(width), height_(height) {
  check_dims(width, height, 1);
  values_.assign(static_cast<std::size_t>(width) * height, fill);
}

ChangeMask::ChangeMask(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  check_dims(width, height, 1);
  if (values_.size() != static_cast<std::size_t>(width) * height) {
    throw ShapeError("mask payload size does not match W*H");
  }
}

bool ChangeMask::in_unit_range() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

BinaryMap::BinaryMap(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  check_dims(width, height, 1);
  values_.assign(static_cast<std::size_t>(width) * height, fill);
}

std::size_t BinaryMap::count_changed() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

ReferenceMap::ReferenceMap(int width, int height, Label fill)
    : width_(width), height_(height) {
  check_dims(width, height, 1);
  labels_.assign(static_cast<std::size_t>(width) * height, fill);
}

std::size_t ReferenceMap::count(Label label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

Var to_batch(std::span<const ImageTensor> images) {
  if (images.empty()) throw ShapeError("to_batch: no images");
  const ImageTensor& first = images.front();
  for (const auto& img : images) {
    if (!img.same_geometry(first)) throw ShapeError("to_batch: images differ in shape");
  }
  const Shape shape{static_cast<int>(images.size()), first.channels(), first.height(),
                    first.width()};
  std::vector<double> values;
  values.reserve(shape.numel());
  for (const auto& img : images) values.insert(values.end(), img.data().begin(), img.data().end());
  return Var::constant(shape, std::move(values));
}

Var to_batch(const ImageTensor& image) { return to_batch(std::span<const ImageTensor>(&image, 1)); }

std::vector<ImageTensor> from_batch(const Var& batch) {
  const Shape s = batch.shape();
  const std::size_t per = static_cast<std::size_t>(s.c) * s.plane();
  std::vector<ImageTensor> out;
  out.reserve(s.n);
  for (int n = 0; n < s.n; ++n) {
    const auto src = batch.value().subspan(n * per, per);
    out.emplace_back(s.w, s.h, s.c, std::vector<double>(src.begin(), src.end()));
  }
  return out;
}

std::vector<ChangeMask> masks_from_batch(const Var& batch) {
  const Shape s = batch.shape();
  if (s.c != 1) throw ShapeError("masks_from_batch: expected one channel, got " + s.str());
  std::vector<ChangeMask> out;
  out.reserve(s.n);
  for (int n = 0; n < s.n; ++n) {
    const auto src = batch.value().subspan(n * s.plane(), s.plane());
    out.emplace_back(s.w, s.h, std::vector<double>(src.begin(), src.end()));
  }
  return out;
}

}  // namespace ccdf
