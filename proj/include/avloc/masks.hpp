// Copyright 2026 The AVLoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <limits>
#include <memory>
#include <type_traits>
#include <utility>

#include "avloc/autodiff.hpp"
#include "avloc/resize.hpp"
#include "avloc/rng.hpp"
#include "avloc/types.hpp"

// Mask generation on top of grounder logit maps: hard-but-differentiable
// image masks (binary-concrete relaxation with a straight-through forward),
// soft feature masks (min-max normalization + soft threshold), and the
// thresholded inference rule.
namespace avloc {

template <typename Scalar>
struct MaskerParams {
  Scalar w = Scalar(1);            // trainable scale
  Scalar b = Scalar(0);            // trainable bias
  Scalar gumbel_temp = Scalar(0.7);
  Scalar soft_theta = Scalar(0.5);
  Scalar soft_temp = Scalar(0.1);
};

enum class MaskMode { kTrain, kEval };

// Hard forward with straight-through backward, or the soft relaxation
// itself (used by the gradient checks).
enum class STMode { kHard, kSoft };

enum class InferenceRule { kPaper, kTrainForm };

// Per-pixel Gumbel(0,1) pair at image resolution, flat 1 x N.
template <typename Scalar>
struct GumbelField {
  Mat<Scalar> g1, g2;

  Mat<Scalar> delta() const { return g1 - g2; }

  static GumbelField zero(Eigen::Index n) {
    return {Mat<Scalar>::Zero(1, n), Mat<Scalar>::Zero(1, n)};
  }
};

namespace detail {

// One counter hash per pixel yields the pair's two uniforms from its high
// and low 32 bits, clamped strictly inside (0, 1) at the working precision
// so -log(u) stays finite and positive.
template <typename Scalar>
void fill_uniform_pairs(std::uint64_t key, Mat<Scalar>& u1, Mat<Scalar>& u2) {
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar hi = Scalar(1) - eps;
  constexpr double kInv32 = 0x1.0p-32;
  for (Eigen::Index p = 0; p < u1.cols(); ++p) {
    const std::uint64_t h =
        mix64(key + (static_cast<std::uint64_t>(p) + 1) *
                        0x9e3779b97f4a7c15ULL);
    const auto a = static_cast<Scalar>((static_cast<double>(h >> 32) + 0.5) *
                                       kInv32);
    const auto b = static_cast<Scalar>(
        (static_cast<double>(h & 0xffffffffULL) + 0.5) * kInv32);
    u1(0, p) = std::clamp(a, eps, hi);
    u2(0, p) = std::clamp(b, eps, hi);
  }
}

}  // namespace detail

// Counter-based sampling: element p of the stream named by `key`, so a field
// can be regenerated from its key alone.
template <typename Scalar>
GumbelField<Scalar> sample_gumbel_field(std::uint64_t key, Eigen::Index n) {
  GumbelField<Scalar> f;
  f.g1.resize(1, n);
  f.g2.resize(1, n);
  detail::fill_uniform_pairs(key, f.g1, f.g2);
  f.g1 = (-(f.g1.array().log())).log().matrix() * Scalar(-1);
  f.g2 = (-(f.g2.array().log())).log().matrix() * Scalar(-1);
  return f;
}

// g1 - g2 of a per-pixel Gumbel(0,1) pair, sampled directly: the difference
// of two independent standard Gumbels is Logistic(0, 1), i.e.
// log(u / (1 - u)) for one uniform u. Same law as materializing the pair,
// two log passes cheaper. `out` is reused across calls on the hot path.
template <typename Scalar>
void sample_gumbel_delta_into(std::uint64_t key, Eigen::Index n,
                              Mat<Scalar>& out) {
  out.resize(1, n);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar hi = Scalar(1) - eps;
  constexpr double kInv64 = 0x1.0p-64;
  for (Eigen::Index p = 0; p < n; ++p) {
    const std::uint64_t h =
        mix64(key + (static_cast<std::uint64_t>(p) + 1) *
                        0x9e3779b97f4a7c15ULL);
    const auto u =
        static_cast<Scalar>((static_cast<double>(h) + 0.5) * kInv64);
    out(0, p) = std::clamp(u, eps, hi);
  }
  out = (out.array() / (Scalar(1) - out.array())).log().matrix();
}

template <typename Scalar>
Mat<Scalar> sample_gumbel_delta(std::uint64_t key, Eigen::Index n) {
  Mat<Scalar> out;
  sample_gumbel_delta_into(key, n, out);
  return out;
}

// Upsampling plan from the grounder grid to image resolution.
struct MaskPlans {
  std::shared_ptr<const ResizeAxis> ay, ax;
  int out_h = 0, out_w = 0;

  static MaskPlans make(int grid_h, int grid_w, int out_h, int out_w) {
    return {std::make_shared<ResizeAxis>(ResizeAxis::make(grid_h, out_h)),
            std::make_shared<ResizeAxis>(ResizeAxis::make(grid_w, out_w)),
            out_h, out_w};
  }
};

// ---------------------------------------------------------------------------
// Image masker (training graph)
// ---------------------------------------------------------------------------

template <typename Scalar>
struct ImageMaskGraph {
  ad::Var<Scalar> mask;    // 1 x (H*W); {0,1} in kHard mode
  ad::Var<Scalar> y_soft;  // 1 x (H*W)
};

// Train-mode mask: y_soft = sigmoid((w*up(m) + b + g1 - g2) / tau_g),
// forward hard-thresholded at 1/2 (strict >), backward through y_soft.
// noise_delta carries g1 - g2; empty means no noise.
template <typename Scalar>
ImageMaskGraph<Scalar> image_mask_train(const ad::Var<Scalar>& grid_logits,
                                        const ad::Var<Scalar>& w,
                                        const ad::Var<Scalar>& b,
                                        const Mat<Scalar>& noise_delta,
                                        Scalar gumbel_temp,
                                        const MaskPlans& plans,
                                        STMode st = STMode::kHard) {
  if (!(gumbel_temp > Scalar(0)))
    throw ValidationError("image_mask: gumbel_temp must be positive");
  auto up = ad::upsample(grid_logits, plans.ay, plans.ax);
  auto pre = ad::sadd(ad::smul(w, up), b);
  if (noise_delta.size() != 0) {
    if (noise_delta.size() != up.value().size())
      throw ValidationError("image_mask: noise field size mismatch");
    pre = pre + ad::Var<Scalar>::constant(noise_delta);
  }
  auto y_soft = ad::sigmoid(ad::scale(pre, Scalar(1) / gumbel_temp));
  ImageMaskGraph<Scalar> out;
  out.y_soft = y_soft;
  out.mask = (st == STMode::kHard) ? ad::binarize_st(y_soft) : y_soft;
  return out;
}

template <typename Scalar>
ImageMaskGraph<Scalar> image_mask_train(const ad::Var<Scalar>& grid_logits,
                                        const ad::Var<Scalar>& w,
                                        const ad::Var<Scalar>& b,
                                        const GumbelField<Scalar>& noise,
                                        Scalar gumbel_temp,
                                        const MaskPlans& plans,
                                        STMode st = STMode::kHard) {
  Mat<Scalar> delta =
      noise.g1.size() != 0 ? noise.delta() : Mat<Scalar>(1, 0);
  return image_mask_train(grid_logits, w, b, delta, gumbel_temp, plans, st);
}

// Plain image mask at image resolution, H x W, values exactly 0 or 1.
// Train mode draws noise from `noise` (zero field allowed for tests);
// eval mode thresholds sigmoid(w*m + b) deterministically.
template <typename Scalar>
Mat<Scalar> image_mask(const Mat<Scalar>& grid_logits,
                       const MaskerParams<Scalar>& params, MaskMode mode,
                       const GumbelField<std::type_identity_t<Scalar>>* noise,
                       int out_h, int out_w) {
  const MaskPlans plans = MaskPlans::make(
      static_cast<int>(grid_logits.rows()),
      static_cast<int>(grid_logits.cols()), out_h, out_w);
  Mat<Scalar> up = upsample_flat(grid_logits, *plans.ay, *plans.ax);
  Mat<Scalar> pre = (up.array() * params.w + params.b).matrix();
  Scalar temp = Scalar(1);
  if (mode == MaskMode::kTrain) {
    if (noise != nullptr && noise->g1.size() != 0) {
      if (noise->g1.size() != pre.size())
        throw ValidationError("image_mask: noise field size mismatch");
      pre += noise->delta();
    }
    temp = params.gumbel_temp;
    if (!(temp > Scalar(0)))
      throw ValidationError("image_mask: gumbel_temp must be positive");
  }
  Mat<Scalar> y_soft =
      (Scalar(1) / (Scalar(1) + (-(pre.array() / temp)).exp())).matrix();
  Mat<Scalar> hard =
      (y_soft.array() > Scalar(0.5)).template cast<Scalar>().matrix();
  return unflatten_rowmajor(hard, out_h, out_w);
}

// ---------------------------------------------------------------------------
// Feature masker
// ---------------------------------------------------------------------------

// sigmoid((minmax(m) - theta) / T_s); constant 1/2 when the logit range is
// degenerate. Resampled bilinearly first when grid and feature shapes differ.
template <typename Scalar>
ad::Var<Scalar> feature_mask_graph(const ad::Var<Scalar>& grid_logits,
                                   const MaskerParams<Scalar>& params,
                                   int feat_h, int feat_w) {
  if (!(params.soft_temp > Scalar(0)))
    throw ValidationError("feature_mask: soft_temp must be positive");
  ad::Var<Scalar> grid = grid_logits;
  if (grid.value().rows() != feat_h || grid.value().cols() != feat_w) {
    const MaskPlans plans =
        MaskPlans::make(static_cast<int>(grid.value().rows()),
                        static_cast<int>(grid.value().cols()), feat_h, feat_w);
    grid = ad::unflatten_rm(ad::upsample(grid, plans.ay, plans.ax), feat_h,
                            feat_w);
  }
  const Scalar range =
      grid.value().maxCoeff() - grid.value().minCoeff();
  if (range < Scalar(1e-8))
    return ad::Var<Scalar>::constant(
        Mat<Scalar>::Constant(feat_h, feat_w, Scalar(0.5)));
  auto normed = ad::minmax_normalize(grid);
  return ad::sigmoid(ad::scale(ad::add_scalar(normed, -params.soft_theta),
                               Scalar(1) / params.soft_temp));
}

template <typename Scalar>
Mat<Scalar> feature_mask(const Mat<Scalar>& grid_logits,
                         const MaskerParams<Scalar>& params) {
  return feature_mask_graph(ad::Var<Scalar>::constant(grid_logits), params,
                            static_cast<int>(grid_logits.rows()),
                            static_cast<int>(grid_logits.cols()))
      .value();
}

// ---------------------------------------------------------------------------
// Inference rule
// ---------------------------------------------------------------------------

template <typename Scalar>
struct InferenceResult {
  Mat<Scalar> confidence;  // H x W in [0, 1]
  Mat<Scalar> binary;      // H x W in {0, 1}, confidence >= t
};

// Upsamples logits, then applies sigmoid(m + b/w) (or the train-form
// sigmoid(w*m + b)); both share the decision boundary m = -b/w for w > 0.
template <typename Scalar>
InferenceResult<Scalar> inference_mask(const Mat<Scalar>& grid_logits,
                                       const MaskerParams<Scalar>& params,
                                       Scalar threshold, int out_h, int out_w,
                                       InferenceRule rule = InferenceRule::kPaper) {
  if (!(params.w > Scalar(0)))
    throw ValidationError(
        "inference_mask: w must be positive to match the training decision "
        "boundary");
  const MaskPlans plans = MaskPlans::make(
      static_cast<int>(grid_logits.rows()),
      static_cast<int>(grid_logits.cols()), out_h, out_w);
  Mat<Scalar> up = upsample_flat(grid_logits, *plans.ay, *plans.ax);
  Arr<Scalar> pre;
  if (rule == InferenceRule::kPaper)
    pre = up.row(0).transpose().array() + params.b / params.w;
  else
    pre = up.row(0).transpose().array() * params.w + params.b;
  Mat<Scalar> conf_flat(1, up.cols());
  conf_flat.row(0) =
      (Scalar(1) / (Scalar(1) + (-pre).exp())).matrix().transpose();
  InferenceResult<Scalar> out;
  out.confidence = unflatten_rowmajor(conf_flat, out_h, out_w);
  out.binary = (out.confidence.array() >= threshold)
                   .template cast<Scalar>()
                   .matrix();
  return out;
}

// ---------------------------------------------------------------------------
// Fused mask-area node
// ---------------------------------------------------------------------------

// Mean of the straight-through mask plus its Jacobian against
// (grid logits, w, b), computed in one pass so the pixel-level field never
// enters the tape. Safe to run concurrently across pairs.
template <typename Scalar>
struct StAreaResult {
  Scalar area = Scalar(0);
  Mat<Scalar> jac_grid;
  Scalar jac_w = Scalar(0);
  Scalar jac_b = Scalar(0);
};

// Reusable pixel-field buffers; one per worker thread on the hot path.
template <typename Scalar>
struct StAreaScratch {
  Mat<Scalar> up, pre, y, t;
};

template <typename Scalar>
StAreaResult<Scalar> st_area_precompute(
    const Mat<Scalar>& grid_logits, Scalar w, Scalar b,
    const Mat<Scalar>& delta, Scalar gumbel_temp, const MaskPlans& plans,
    STMode st, StAreaScratch<Scalar>* scratch = nullptr) {
  if (!(gumbel_temp > Scalar(0)))
    throw ValidationError("st_mask_area: gumbel_temp must be positive");
  StAreaScratch<Scalar> local;
  StAreaScratch<Scalar>& s = scratch ? *scratch : local;

  upsample_flat_into(grid_logits, *plans.ay, *plans.ax, s.up);
  const Eigen::Index n = s.up.size();
  s.pre = (s.up.array() * w + b).matrix();
  if (delta.size() != 0) {
    if (delta.size() != n)
      throw ValidationError("st_mask_area: noise field size mismatch");
    s.pre += delta;
  }
  s.y = (Scalar(1) /
         (Scalar(1) + (-(s.pre.array() / gumbel_temp)).exp()))
            .matrix();
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);

  StAreaResult<Scalar> out;
  if (st == STMode::kHard)
    out.area = (s.y.array() > Scalar(0.5)).template cast<Scalar>().sum() *
               inv_n;
  else
    out.area = s.y.sum() * inv_n;

  // d area / d pre_p through the soft surrogate, then the chain to inputs.
  s.t = (s.y.array() * (Scalar(1) - s.y.array()) * (inv_n / gumbel_temp))
            .matrix();
  out.jac_grid = upsample_flat_transpose(s.t, grid_logits.rows(),
                                         grid_logits.cols(), *plans.ay,
                                         *plans.ax) *
                 w;
  out.jac_w = (s.t.array() * s.up.array()).sum();
  out.jac_b = s.t.sum();
  return out;
}

template <typename Scalar>
ad::Var<Scalar> st_area_node(StAreaResult<Scalar> pre,
                             const ad::Var<Scalar>& grid_logits,
                             const ad::Var<Scalar>& w,
                             const ad::Var<Scalar>& b) {
  return ad::make_node<Scalar>(
      Mat<Scalar>::Constant(1, 1, pre.area), {grid_logits, w, b},
      [jac_grid = std::move(pre.jac_grid), jac_w = pre.jac_w,
       jac_b = pre.jac_b](ad::Node<Scalar>& node) {
        const Scalar g = node.grad(0, 0);
        if (node.parents[0]->needs_grad)
          node.parents[0]->accumulate(g * jac_grid);
        if (node.parents[1]->needs_grad)
          node.parents[1]->accumulate(Mat<Scalar>::Constant(1, 1, g * jac_w));
        if (node.parents[2]->needs_grad)
          node.parents[2]->accumulate(Mat<Scalar>::Constant(1, 1, g * jac_b));
      });
}

template <typename Scalar>
ad::Var<Scalar> st_mask_area(const ad::Var<Scalar>& grid_logits,
                             const ad::Var<Scalar>& w, const ad::Var<Scalar>& b,
                             const GumbelField<Scalar>& noise,
                             Scalar gumbel_temp, const MaskPlans& plans,
                             STMode st = STMode::kHard) {
  Mat<Scalar> delta =
      noise.g1.size() != 0 ? noise.delta() : Mat<Scalar>(1, 0);
  auto pre = st_area_precompute(grid_logits.value(), w.scalar(), b.scalar(),
                                delta, gumbel_temp, plans, st);
  return st_area_node(std::move(pre), grid_logits, w, b);
}

}  // namespace avloc
