#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ccdf/autograd.hpp"

namespace ccdf {

// W×H×C raster stored band-sequential: index = (c * height + y) * width + x.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int width, int height, int channels, double fill = 0.0);
  ImageTensor(int width, int height, int channels, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y, int c) { return data_[index(x, y, c)]; }
  double at(int x, int y, int c) const { return data_[index(x, y, c)]; }
  std::span<double> band(int c);
  std::span<const double> band(int c) const;
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool all_finite() const;
  bool same_geometry(const ImageTensor& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }
  bool operator==(const ImageTensor&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Per-pixel change probability, every value in [0, 1].
class ChangeMask {
 public:
  ChangeMask() = default;
  ChangeMask(int width, int height, double fill = 0.0);
  ChangeMask(int width, int height, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  double& at(int x, int y) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool in_unit_range() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

// Binarized change map: 1 = changed, 0 = unchanged.
class BinaryMap {
 public:
  BinaryMap() = default;
  BinaryMap(int width, int height, std::uint8_t fill = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::uint8_t& at(int x, int y) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<std::uint8_t> values() { return values_; }
  std::span<const std::uint8_t> values() const { return values_; }
  std::size_t count_changed() const;
  bool operator==(const BinaryMap&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> values_;
};

enum class Label : std::uint8_t { Unchanged = 0, Changed = 1, Undefined = 255 };

class ReferenceMap {
 public:
  ReferenceMap() = default;
  ReferenceMap(int width, int height, Label fill = Label::Undefined);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return labels_.size(); }
  Label& at(int x, int y) { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  Label at(int x, int y) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<Label> labels() { return labels_; }
  std::span<const Label> labels() const { return labels_; }
  std::size_t count(Label label) const;
  bool operator==(const ReferenceMap&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Label> labels_;
};

// Stacks same-shaped images into an N×C×H×W constant tensor.
Var to_batch(std::span<const ImageTensor> images);
Var to_batch(const ImageTensor& image);
// Splits an N×C×H×W tensor back into images.
std::vector<ImageTensor> from_batch(const Var& batch);
// N×1×H×W tensor to masks; the caller guarantees values lie in [0,1].
std::vector<ChangeMask> masks_from_batch(const Var& batch);

}  // namespace ccdf
