#include "ccdf/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ccdf/errors.hpp"

namespace ccdf {

namespace {

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

Moments population_moments(std::span<const double> values) {
  double total = 0.0;
  for (double v : values) total += v;
  const double mean = total / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

void validate_grid(const PatchGrid& grid) {
  if (grid.patches.empty()) throw ShapeError("patch grid is empty");
  if (grid.patches.size() != grid.offsets.size()) {
    throw ShapeError("patch grid has " + std::to_string(grid.patches.size()) + " patches but " +
                     std::to_string(grid.offsets.size()) + " offsets");
  }
  if (grid.source_width < 1 || grid.source_height < 1) {
    throw ShapeError("patch grid has invalid source size");
  }
  const int channels = grid.patches.front().channels();
  for (std::size_t i = 0; i < grid.patches.size(); ++i) {
    const ImageTensor& p = grid.patches[i];
    const PatchOffset o = grid.offsets[i];
    if (p.channels() != channels) throw ShapeError("patch grid mixes channel counts");
    if (o.x < 0 || o.y < 0 || o.x + p.width() > grid.source_width ||
        o.y + p.height() > grid.source_height) {
      throw ShapeError("patch " + std::to_string(i) + " exceeds the source extent");
    }
  }
}

}  // namespace

ImageTensor standardize(const ImageTensor& image, const StandardizeOptions& options) {
  if (image.empty()) throw ShapeError("standardize: empty image");
  if (!image.all_finite()) throw DegenerateInputError("standardize: non-finite input");
  ImageTensor out = image;
  auto apply = [&](std::span<const double> src, std::span<double> dst) {
    const Moments m = population_moments(src);
    double scale = m.stddev;
    if (scale == 0.0 || (options.epsilon_mode && scale < options.epsilon)) {
      if (!options.epsilon_mode) {
        throw DegenerateInputError("standardize: constant input has zero standard deviation");
      }
      scale = options.epsilon;
    }
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] - m.mean) / scale;
  };
  if (options.per_band) {
    for (int c = 0; c < image.channels(); ++c) apply(image.band(c), out.band(c));
  } else {
    apply(image.data(), out.data());
  }
  return out;
}

std::vector<int> window_starts(int extent, int patch, int overlap) {
  if (patch < 1) throw ShapeError("patch size must be positive");
  if (overlap < 0 || overlap >= patch) {
    throw ShapeError("overlap must satisfy 0 <= overlap < patch size");
  }
  if (patch > extent) {
    throw ShapeError("patch size " + std::to_string(patch) + " exceeds image dimension " +
                     std::to_string(extent));
  }
  const int stride = patch - overlap;
  std::vector<int> starts;
  for (int s = 0;; s += stride) {
    const int clamped = std::min(s, extent - patch);
    if (starts.empty() || starts.back() != clamped) starts.push_back(clamped);
    if (s + patch >= extent) break;
  }
  return starts;
}

PatchGrid tile(const ImageTensor& image, int patch_size, int overlap) {
  if (image.empty()) throw ShapeError("tile: empty image");
  const auto xs = window_starts(image.width(), patch_size, overlap);
  const auto ys = window_starts(image.height(), patch_size, overlap);
  PatchGrid grid;
  grid.source_width = image.width();
  grid.source_height = image.height();
  grid.patch_size = patch_size;
  grid.overlap = overlap;
  for (int y0 : ys) {
    for (int x0 : xs) {
      ImageTensor patch(patch_size, patch_size, image.channels());
      for (int c = 0; c < image.channels(); ++c) {
        for (int y = 0; y < patch_size; ++y) {
          for (int x = 0; x < patch_size; ++x) patch.at(x, y, c) = image.at(x0 + x, y0 + y, c);
        }
      }
      grid.patches.push_back(std::move(patch));
      grid.offsets.push_back({x0, y0});
    }
  }
  return grid;
}

ImageTensor stitch(const PatchGrid& grid) {
  validate_grid(grid);
  const int channels = grid.patches.front().channels();
  ImageTensor sum(grid.source_width, grid.source_height, channels, 0.0);
  const std::vector<int> counts = coverage_counts(grid);
  for (std::size_t i = 0; i < grid.patches.size(); ++i) {
    const ImageTensor& p = grid.patches[i];
    const PatchOffset o = grid.offsets[i];
    for (int c = 0; c < channels; ++c) {
      for (int y = 0; y < p.height(); ++y) {
        for (int x = 0; x < p.width(); ++x) sum.at(o.x + x, o.y + y, c) += p.at(x, y, c);
      }
    }
  }
  const std::size_t plane = static_cast<std::size_t>(grid.source_width) * grid.source_height;
  for (std::size_t i = 0; i < plane; ++i) {
    if (counts[i] == 0) throw ShapeError("stitch: patches do not cover the source extent");
  }
  for (int c = 0; c < channels; ++c) {
    auto band = sum.band(c);
    for (std::size_t i = 0; i < plane; ++i) band[i] /= counts[i];
  }
  return sum;
}

ChangeMask stitch_mask(const PatchGrid& grid) {
  validate_grid(grid);
  if (grid.patches.front().channels() != 1) {
    throw ShapeError("stitch_mask: mask patches must be single-channel");
  }
  const ImageTensor merged = stitch(grid);
  std::vector<double> values(merged.data().begin(), merged.data().end());
  for (double& v : values) v = std::clamp(v, 0.0, 1.0);
  return ChangeMask(merged.width(), merged.height(), std::move(values));
}

std::vector<int> coverage_counts(const PatchGrid& grid) {
  validate_grid(grid);
  std::vector<int> counts(static_cast<std::size_t>(grid.source_width) * grid.source_height, 0);
  for (std::size_t i = 0; i < grid.patches.size(); ++i) {
    const PatchOffset o = grid.offsets[i];
    for (int y = 0; y < grid.patches[i].height(); ++y) {
      for (int x = 0; x < grid.patches[i].width(); ++x) {
        ++counts[static_cast<std::size_t>(o.y + y) * grid.source_width + o.x + x];
      }
    }
  }
  return counts;
}

bool aligned(const PatchGrid& a, const PatchGrid& b) {
  return a.offsets == b.offsets && a.source_width == b.source_width &&
         a.source_height == b.source_height && a.patch_size == b.patch_size &&
         a.patches.size() == b.patches.size();
}

}  // namespace ccdf
