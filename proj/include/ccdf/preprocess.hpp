#pragma once

#include <vector>

#include "ccdf/image.hpp"

namespace ccdf {

struct StandardizeOptions {
  // Statistics per band instead of jointly over all W*H*C values.
  bool per_band = false;
  // Divide by max(std, epsilon) instead of rejecting constant inputs.
  bool epsilon_mode = false;
  double epsilon = 1e-8;
};

// (x - mean) / std with the population standard deviation.
// Throws DegenerateInputError for constant input unless epsilon_mode is set.
ImageTensor standardize(const ImageTensor& image, const StandardizeOptions& options = {});

struct PatchOffset {
  int x = 0;
  int y = 0;
  bool operator==(const PatchOffset&) const = default;
};

struct PatchGrid {
  std::vector<ImageTensor> patches;
  std::vector<PatchOffset> offsets;  // top-left corners, row-major
  int source_width = 0;
  int source_height = 0;
  int patch_size = 0;
  int overlap = 0;

  std::size_t size() const { return patches.size(); }
};

// Window starts along one axis: 0, s, 2s, ... with s = patch - overlap, the
// last start clamped to extent - patch, duplicates removed.
std::vector<int> window_starts(int extent, int patch, int overlap);

PatchGrid tile(const ImageTensor& image, int patch_size, int overlap);

// Per-pixel mean over every patch covering the pixel.
ImageTensor stitch(const PatchGrid& grid);
// Single-channel variant producing a change probability map.
ChangeMask stitch_mask(const PatchGrid& grid);

// Number of patches covering each pixel (W×H, row-major).
std::vector<int> coverage_counts(const PatchGrid& grid);

// Same offsets and geometry; required for co-located training pairs.
bool aligned(const PatchGrid& a, const PatchGrid& b);

}  // namespace ccdf
