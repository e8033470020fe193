#pragma once

// Shared fixtures and independent reference implementations for the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ccdf/autograd.hpp"
#include "ccdf/change_segmentation.hpp"
#include "ccdf/image.hpp"
#include "ccdf/metrics.hpp"
#include "ccdf/nn.hpp"
#include "ccdf/semantic_consistency.hpp"

namespace ccdf::test {

inline Var random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape.numel());
  for (auto& x : v) x = dist(rng);
  return Var::constant(shape, std::move(v));
}

inline ImageTensor random_image(int w, int h, int c, std::mt19937_64& rng, double lo = 0.0,
                                double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  ImageTensor img(w, h, c);
  for (auto& x : img.data()) x = dist(rng);
  return img;
}

inline ChangeMask random_mask(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  ChangeMask m(w, h);
  for (auto& x : m.values()) x = dist(rng);
  return m;
}

inline Var tensor(Shape shape, std::vector<double> values) {
  return Var::constant(shape, std::move(values));
}

inline std::vector<double> values(const Var& v) { return {v.value().begin(), v.value().end()}; }

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Central finite differences of `loss` against every trainable parameter of
// `module`, compared with the analytic gradient. Returns the largest
// per-tensor relative error ||analytic - numeric|| / max(||analytic||, ||numeric||).
// Tensors whose gradient vanishes on both sides (e.g. a bias cancelled by a
// difference) count as exact. `numeric_loss`, when given, is differentiated
// numerically instead of `loss`, for losses with stop-gradient branches.
inline double gradient_check(const Module& module, const std::function<Var()>& loss,
                             const std::function<Var()>& numeric_loss = {}, double step = 1e-6) {
  const std::function<Var()>& probe_loss = numeric_loss ? numeric_loss : loss;
  module.zero_grad();
  backward(loss());
  double worst = 0.0;
  for (const auto& p : module.named_parameters()) {
    if (!p.value.requires_grad()) continue;
    const std::vector<double> analytic = p.value.grad();
    Var handle = p.value;
    auto v = handle.mutable_value();
    double diff2 = 0.0;
    double a2 = 0.0;
    double n2 = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double orig = v[i];
      double plus;
      double minus;
      {
        NoGradGuard no_grad;
        v[i] = orig + step;
        plus = probe_loss().item();
        v[i] = orig - step;
        minus = probe_loss().item();
      }
      v[i] = orig;
      const double numeric = (plus - minus) / (2.0 * step);
      diff2 += (numeric - analytic[i]) * (numeric - analytic[i]);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    if (std::max(a2, n2) < 1e-14) continue;
    const double denom = std::max(std::sqrt(a2), std::sqrt(n2));
    worst = std::max(worst, std::sqrt(diff2) / denom);
  }
  return worst;
}

// Stage-2 loss whose augmented-branch target is evaluated once, at the
// current parameters, and then held constant: the function the analytic
// stage-2 gradient differentiates.
inline std::function<Var()> stage2_with_frozen_target(const MaskPredictor& s, Var g, Var p1,
                                                      Var p2, Augmentation a,
                                                      const FeatureExtractor& phi,
                                                      LossWeights w) {
  Var target;
  {
    NoGradGuard no_grad;
    target = restore(s(augment(p1, a), augment(p2, a)), a);
  }
  target = Var::constant(target.shape(), values(target));
  return [&s, g, p1, p2, target, &phi, w] {
    const Var m = s(p1, p2);
    return add(seg_loss(g, p2, m, phi, w), affine(l1_loss(target, m, w.reduction), w.semantic, 0.0));
  };
}

// Perturbs every parameter so no layer sits at a special initial value
// (e.g. the zero-initialized generator head).
inline void jitter_parameters(const Module& module, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Var p : module.parameters()) {
    for (auto& v : p.mutable_value()) v += dist(rng);
  }
}

// Pixel-by-pixel counting and textbook formulas, kept separate from the
// library implementation.
struct OracleScores {
  double oa, kc, precision, recall, f1, miou, ciou;
  std::uint64_t tp, fp, tn, fn;
};

inline OracleScores oracle_scores(const BinaryMap& pred, const ReferenceMap& ref) {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (int y = 0; y < ref.height(); ++y) {
    for (int x = 0; x < ref.width(); ++x) {
      const Label l = ref.at(x, y);
      if (l == Label::Undefined) continue;
      const bool p = pred.at(x, y) != 0;
      const bool t = l == Label::Changed;
      if (p && t) ++tp;
      if (p && !t) ++fp;
      if (!p && !t) ++tn;
      if (!p && t) ++fn;
    }
  }
  auto ratio = [](double a, double b) { return b == 0.0 ? 0.0 : a / b; };
  const double n = static_cast<double>(tp + fp + tn + fn);
  OracleScores s{};
  s.tp = tp;
  s.fp = fp;
  s.tn = tn;
  s.fn = fn;
  s.oa = ratio(static_cast<double>(tp + tn), n);
  s.precision = ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
  s.recall = ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
  s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
  s.ciou = ratio(static_cast<double>(tp), static_cast<double>(tp + fp + fn));
  const double uiou = ratio(static_cast<double>(tn), static_cast<double>(tn + fp + fn));
  s.miou = (s.ciou + uiou) / 2.0;
  const double pe = (static_cast<double>(tp + fp) * static_cast<double>(tp + fn) +
                     static_cast<double>(tn + fn) * static_cast<double>(tn + fp)) /
                    (n * n);
  s.kc = ratio(s.oa - pe, 1.0 - pe);
  return s;
}

// Random tri-state reference and binary prediction.
inline void random_fixture(int w, int h, std::mt19937_64& rng, BinaryMap& pred, ReferenceMap& ref) {
  pred = BinaryMap(w, h);
  ref = ReferenceMap(w, h);
  std::uniform_int_distribution<int> label(0, 2);
  std::uniform_int_distribution<int> bit(0, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = label(rng);
      ref.at(x, y) = l == 0 ? Label::Unchanged : l == 1 ? Label::Changed : Label::Undefined;
      pred.at(x, y) = static_cast<std::uint8_t>(bit(rng));
    }
  }
  ref.at(0, 0) = Label::Changed;
}

// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ccdf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ccdf::test
