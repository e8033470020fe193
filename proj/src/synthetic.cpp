#include "ccdf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "ccdf/errors.hpp"

namespace ccdf {

namespace {

// Smooth oriented waves shared across bands, band-specific waves, and
// rectangular "parcels" with a random spectral signature.
ImageTensor procedural_texture(std::mt19937_64& rng, int w, int h, int channels) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  struct Wave {
    double kx, ky, phase, amp;
  };
  auto random_waves = [&](int count) {
    std::vector<Wave> waves;
    for (int i = 0; i < count; ++i) {
      const double period = 6.0 + 42.0 * unit(rng);
      const double theta = std::numbers::pi * unit(rng);
      const double k = 2.0 * std::numbers::pi / period;
      waves.push_back({k * std::cos(theta), k * std::sin(theta),
                       2.0 * std::numbers::pi * unit(rng), 0.5 + unit(rng)});
    }
    return waves;
  };
  auto eval = [](const std::vector<Wave>& waves, int x, int y) {
    double v = 0.0;
    double norm = 0.0;
    for (const auto& wv : waves) {
      v += wv.amp * std::sin(wv.kx * x + wv.ky * y + wv.phase);
      norm += wv.amp;
    }
    return v / norm;
  };

  const auto shared = random_waves(6);
  std::vector<std::vector<Wave>> own;
  std::vector<double> mix;
  for (int c = 0; c < channels; ++c) {
    own.push_back(random_waves(3));
    mix.push_back(0.3 + 0.4 * unit(rng));
  }

  ImageTensor img(w, h, channels);
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        img.at(x, y, c) =
            0.5 + 0.4 * (mix[c] * eval(shared, x, y) + (1.0 - mix[c]) * eval(own[c], x, y));
      }
    }
  }

  const int parcels = std::max(1, w * h / 900);
  std::uniform_int_distribution<int> side(4, 18);
  for (int p = 0; p < parcels; ++p) {
    const int pw = std::min(w, side(rng));
    const int ph = std::min(h, side(rng));
    const int px = std::uniform_int_distribution<int>(0, w - pw)(rng);
    const int py = std::uniform_int_distribution<int>(0, h - ph)(rng);
    std::vector<double> signature(channels);
    for (auto& s : signature) s = 0.15 + 0.7 * unit(rng);
    for (int c = 0; c < channels; ++c) {
      for (int y = py; y < py + ph; ++y) {
        for (int x = px; x < px + pw; ++x) img.at(x, y, c) = signature[c];
      }
    }
  }
  return img;
}

}  // namespace

void validate(const SyntheticSpec& spec) {
  if (spec.width < 1 || spec.height < 1 || spec.channels < 1) {
    throw ConfigError("synthetic spec: dimensions must be positive");
  }
  if (!spec.gain.empty() && spec.gain.size() != static_cast<std::size_t>(spec.channels)) {
    throw ConfigError("synthetic spec: gain needs one entry per channel");
  }
  if (!spec.bias.empty() && spec.bias.size() != static_cast<std::size_t>(spec.channels)) {
    throw ConfigError("synthetic spec: bias needs one entry per channel");
  }
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    throw ConfigError("synthetic spec: noise_sigma must be finite and >= 0");
  }
  for (std::size_t i = 0; i < spec.change_regions.size(); ++i) {
    const Rect& r = spec.change_regions[i];
    if (r.width < 1 || r.height < 1 || r.x < 0 || r.y < 0 || r.x + r.width > spec.width ||
        r.y + r.height > spec.height) {
      throw ShapeError("change region " + std::to_string(i) + " lies outside the image");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (r.intersects(spec.change_regions[j])) {
        throw ShapeError("change regions " + std::to_string(j) + " and " + std::to_string(i) +
                         " overlap");
      }
    }
  }
}

SyntheticPair make_synthetic_pair(const SyntheticSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.rng_seed);
  ImageTensor t1 = procedural_texture(rng, spec.width, spec.height, spec.channels);
  const ImageTensor replacement = procedural_texture(rng, spec.width, spec.height, spec.channels);

  ReferenceMap reference(spec.width, spec.height, Label::Unchanged);
  for (const Rect& r : spec.change_regions) {
    for (int y = r.y; y < r.y + r.height; ++y) {
      for (int x = r.x; x < r.x + r.width; ++x) reference.at(x, y) = Label::Changed;
    }
  }

  ImageTensor t2(spec.width, spec.height, spec.channels);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int c = 0; c < spec.channels; ++c) {
    const double gain = spec.gain.empty() ? 1.0 : spec.gain[c];
    const double bias = spec.bias.empty() ? 0.0 : spec.bias[c];
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const bool changed = reference.at(x, y) == Label::Changed;
        const double content = changed ? replacement.at(x, y, c) : t1.at(x, y, c);
        double v = gain * content + bias;
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise(rng);
        t2.at(x, y, c) = v;
      }
    }
  }
  return {std::move(t1), std::move(t2), std::move(reference)};
}

}  // namespace ccdf
