#pragma once

// Procedural bi-temporal pairs with known change regions.

#include <cstdint>
#include <tuple>
#include <vector>

#include "ccdf/image.hpp"

namespace ccdf {

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool contains(int px, int py) const {
    return px >= x && px < x + width && py >= y && py < y + height;
  }
  bool intersects(const Rect& o) const {
    return x < o.x + o.width && o.x < x + width && y < o.y + o.height && o.y < y + height;
  }
};

struct SyntheticSpec {
  int width = 256;
  int height = 256;
  int channels = 4;
  // Per-channel affine style shift T1 -> T2; empty means identity.
  std::vector<double> gain;
  std::vector<double> bias;
  double noise_sigma = 0.0;
  std::vector<Rect> change_regions;
  std::uint64_t rng_seed = 0;
};

struct SyntheticPair {
  ImageTensor t1;
  ImageTensor t2;
  ReferenceMap reference;
};

// Throws ConfigError for invalid specs and ShapeError for regions outside the
// image or overlapping each other.
void validate(const SyntheticSpec& spec);

// I_T2 = gain * I_T1 + bias + noise outside the change regions; inside them
// the content is replaced by an independent texture (then styled and noised).
SyntheticPair make_synthetic_pair(const SyntheticSpec& spec);

}  // namespace ccdf
