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

#include <vector>

#include "avloc/autodiff.hpp"
#include "avloc/backends.hpp"
#include "avloc/embedder.hpp"
#include "avloc/masks.hpp"
#include "avloc/types.hpp"

// Batch similarity matrices and the training objective: symmetric InfoNCE at
// the image and feature levels plus area regularization.
namespace avloc {

template <typename Scalar>
struct LossConfig {
  Scalar tau = Scalar(0.07);
  Scalar lambda_acl_i = Scalar(1);
  Scalar lambda_acl_f = Scalar(1);
  Scalar lambda_reg = Scalar(1);
  Scalar p_pos = Scalar(0.4);
  Scalar p_neg = Scalar(0.0);
};

// ---------------------------------------------------------------------------
// Symmetric InfoNCE
// ---------------------------------------------------------------------------

// -(1/2B) sum_i log softmax_row(S/tau)_ii - (1/2B) sum_i log softmax_col(S/tau)_ii
template <typename Scalar>
ad::Var<Scalar> info_nce_symmetric(const ad::Var<Scalar>& similarity,
                                   Scalar tau) {
  const auto& s = similarity.value();
  if (s.rows() != s.cols())
    throw ValidationError("info_nce_symmetric: similarity must be square");
  if (s.rows() < 1)
    throw ValidationError("info_nce_symmetric: empty similarity");
  if (!(tau > Scalar(0)))
    throw ValidationError("info_nce_symmetric: tau must be positive");
  const auto b = static_cast<Scalar>(s.rows());
  auto scaled = ad::scale(similarity, Scalar(1) / tau);
  auto rows = ad::sum(ad::logsumexp_rows(scaled));
  auto cols = ad::sum(ad::logsumexp_rows(ad::transpose(scaled)));
  auto diag = ad::scale(ad::sum(ad::diagonal(scaled)), Scalar(2));
  return ad::scale(rows + cols - diag, Scalar(1) / (Scalar(2) * b));
}

template <typename Scalar>
Scalar info_nce_symmetric(const Mat<Scalar>& similarity, Scalar tau) {
  return info_nce_symmetric(ad::Var<Scalar>::constant(similarity), tau)
      .scalar();
}

// ---------------------------------------------------------------------------
// Masked spatial pooling
// ---------------------------------------------------------------------------

// v = sum_hw(mask * features) / sum_hw(mask); features c x (h*w), mask h x w.
template <typename Scalar>
ad::Var<Scalar> masked_spatial_pool(const ad::Var<Scalar>& features,
                                    const ad::Var<Scalar>& mask) {
  if (features.value().cols() != mask.value().size())
    throw ValidationError("masked_spatial_pool: resolution mismatch");
  if (!(mask.value().array() >= Scalar(0)).all())
    throw ValidationError("masked_spatial_pool: negative mask weight");
  if (!(mask.value().sum() > Scalar(0)))
    throw ValidationError("masked_spatial_pool: mask sums to zero");
  auto flat = ad::flatten_rm(mask);
  auto weighted = ad::mask_channels(features, flat);
  return ad::sdiv(ad::row_mean(weighted), ad::mean(flat));
}

template <typename Scalar>
Vec<Scalar> masked_spatial_pool(const Mat<Scalar>& features,
                                const Mat<Scalar>& mask) {
  return masked_spatial_pool(ad::Var<Scalar>::constant(features),
                             ad::Var<Scalar>::constant(mask))
      .value();
}

// ---------------------------------------------------------------------------
// Similarity matrices (plain forms; the batch graph assembles its own)
// ---------------------------------------------------------------------------

// S^I_{i,j} = <normalize(E_v(M_i * X_i).global), A_j>; one masked re-encode
// per sample, positives only.
template <typename Scalar>
Mat<Scalar> image_level_similarity(
    const std::vector<ImageTensor<Scalar>>& images,
    const std::vector<Mat<Scalar>>& positive_masks,
    const std::vector<Vec<Scalar>>& embeddings,
    const ImageEncoder<Scalar>& encoder) {
  const auto b = static_cast<Eigen::Index>(images.size());
  if (positive_masks.size() != images.size() ||
      embeddings.size() != images.size())
    throw ValidationError("image_level_similarity: batch size mismatch");
  Mat<Scalar> s(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& img = images[static_cast<std::size_t>(i)];
    const auto& mask = positive_masks[static_cast<std::size_t>(i)];
    if (mask.rows() != img.height || mask.cols() != img.width)
      throw ValidationError("image_level_similarity: mask resolution mismatch");
    Mat<Scalar> flat = flatten_rowmajor(mask);
    ImageTensor<Scalar> masked;
    masked.height = img.height;
    masked.width = img.width;
    masked.pixels = img.pixels.array().rowwise() * flat.row(0).array();
    Vec<Scalar> global = encoder.encode(masked).first;
    const Scalar nrm = std::max(global.norm(), Scalar(1e-12));
    for (Eigen::Index j = 0; j < b; ++j)
      s(i, j) = global.dot(embeddings[static_cast<std::size_t>(j)]) / nrm;
  }
  return s;
}

// S^F_{i,j} = <normalize(pool(vD_i, M^F_{i,j})), A_j> over all pairs.
template <typename Scalar>
Mat<Scalar> feature_level_similarity(
    const std::vector<SpatialFeatures<Scalar>>& features,
    const std::vector<Vec<Scalar>>& embeddings,
    const Grounder<Scalar>& grounder, const MaskerParams<Scalar>& params) {
  const auto b = static_cast<Eigen::Index>(features.size());
  if (embeddings.size() != features.size())
    throw ValidationError("feature_level_similarity: batch size mismatch");
  Mat<Scalar> s(b, b);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j < b; ++j) {
      const auto& vd = features[static_cast<std::size_t>(i)];
      Mat<Scalar> logits =
          grounder.ground(vd, embeddings[static_cast<std::size_t>(j)]);
      Mat<Scalar> mask = feature_mask(logits, params);
      Vec<Scalar> pooled = masked_spatial_pool(vd.features, mask);
      const Scalar nrm = std::max(pooled.norm(), Scalar(1e-12));
      s(i, j) = pooled.dot(embeddings[static_cast<std::size_t>(j)]) / nrm;
    }
  return s;
}

// ---------------------------------------------------------------------------
// Area regularization
// ---------------------------------------------------------------------------

// sum_i |p+ - mean(M_ii)| + sum_{i != j} |p- - mean(M_ij)|, plain sums.
// masks holds B*B image-resolution masks in row-major pair order.
template <typename Scalar>
Scalar area_regularizer(const std::vector<Mat<Scalar>>& masks, int batch,
                        const LossConfig<Scalar>& cfg) {
  if (static_cast<int>(masks.size()) != batch * batch)
    throw ValidationError("area_regularizer: expected B*B masks");
  Scalar loss = Scalar(0);
  for (int i = 0; i < batch; ++i)
    for (int j = 0; j < batch; ++j) {
      const Scalar area =
          masks[static_cast<std::size_t>(i * batch + j)].mean();
      const Scalar prior = (i == j) ? cfg.p_pos : cfg.p_neg;
      loss += std::abs(prior - area);
    }
  return loss;
}

// ---------------------------------------------------------------------------
// Total loss
// ---------------------------------------------------------------------------

template <typename Scalar>
struct LossBreakdown {
  Scalar total = Scalar(0);
  Scalar acl_i = Scalar(0);
  Scalar acl_f = Scalar(0);
  Scalar reg = Scalar(0);
  Scalar mask_area_pos_mean = Scalar(0);
};

template <typename Scalar>
LossBreakdown<Scalar> total_loss(Scalar acl_i, Scalar acl_f, Scalar reg,
                                 const LossConfig<Scalar>& cfg) {
  LossBreakdown<Scalar> out;
  out.acl_i = acl_i;
  out.acl_f = acl_f;
  out.reg = reg;
  out.total = cfg.lambda_acl_i * acl_i + cfg.lambda_acl_f * acl_f +
              cfg.lambda_reg * reg;
  return out;
}

// ---------------------------------------------------------------------------
// Batch graph
// ---------------------------------------------------------------------------

template <typename Scalar>
struct BatchSample {
  ImageTensor<Scalar> image;
  Mat<Scalar> audio_features;  // T x D_a
  // Frozen spatial features of the unmasked image; filled lazily by the
  // batch graph when absent and cacheable across steps.
  SpatialFeatures<Scalar> spatial;
};

template <typename Scalar>
struct MaskerVars {
  ad::Var<Scalar> w, b;

  static MaskerVars leaves(const MaskerParams<Scalar>& p) {
    return {ad::Var<Scalar>::leaf(Mat<Scalar>::Constant(1, 1, p.w)),
            ad::Var<Scalar>::leaf(Mat<Scalar>::Constant(1, 1, p.b))};
  }
};

template <typename Scalar>
struct BatchGraph {
  ad::Var<Scalar> total;
  ad::Var<Scalar> acl_i, acl_f, reg;
  LossBreakdown<Scalar> breakdown;
  std::vector<ad::Var<Scalar>> embeddings;
};

// Full training objective for one batch. Image masks are generated for every
// pair (the area term needs their means) but only positive pairs are pushed
// through the image encoder; negative pairs go through the fused area node.
// noise_key names the per-step Gumbel stream; pair (i, j) draws from
// substream stream_key({noise_key, i, j}).
template <typename Scalar>
BatchGraph<Scalar> build_batch_loss(const std::vector<BatchSample<Scalar>>& batch,
                                    const ProjectionVars<Scalar>& proj,
                                    const MaskerVars<Scalar>& masker,
                                    const MaskerParams<Scalar>& masker_cfg,
                                    const LossConfig<Scalar>& loss_cfg,
                                    const BackendSet<Scalar>& backends,
                                    std::uint64_t noise_key,
                                    STMode st = STMode::kHard) {
  const int b = static_cast<int>(batch.size());
  if (b < 1) throw ValidationError("build_batch_loss: empty batch");

  BatchGraph<Scalar> out;
  for (const auto& sample : batch)
    out.embeddings.push_back(
        embed_audio_features(sample.audio_features, proj, backends));

  std::vector<SpatialFeatures<Scalar>> spatial;
  spatial.reserve(batch.size());
  for (const auto& sample : batch)
    spatial.push_back(sample.spatial.features.size() != 0
                          ? sample.spatial
                          : backends.image->encode(sample.image).second);

  const int img_h = batch[0].image.height, img_w = batch[0].image.width;
  const MaskPlans plans =
      MaskPlans::make(spatial[0].h, spatial[0].w, img_h, img_w);

  // All-pair grounding at feature resolution.
  std::vector<ad::Var<Scalar>> grid(static_cast<std::size_t>(b) * b);
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < b; ++j)
      grid[static_cast<std::size_t>(i * b + j)] = backends.grounder->ground(
          spatial[static_cast<std::size_t>(i)],
          out.embeddings[static_cast<std::size_t>(j)]);

  // Feature-level path over all pairs.
  std::vector<ad::Var<Scalar>> sf_entries;
  sf_entries.reserve(static_cast<std::size_t>(b) * b);
  for (int i = 0; i < b; ++i) {
    const auto& vd = spatial[static_cast<std::size_t>(i)];
    auto vd_const = ad::Var<Scalar>::constant(vd.features);
    for (int j = 0; j < b; ++j) {
      auto mask = feature_mask_graph(grid[static_cast<std::size_t>(i * b + j)],
                                     masker_cfg, vd.h, vd.w);
      auto pooled = ad::l2_normalize(masked_spatial_pool(vd_const, mask));
      sf_entries.push_back(
          ad::dot(pooled, out.embeddings[static_cast<std::size_t>(j)]));
    }
  }
  auto sim_f = ad::from_scalars(b, b, sf_entries);
  out.acl_f = info_nce_symmetric(sim_f, loss_cfg.tau);

  // Image-level path: positive masks materialized, re-encoded, compared
  // against every audio embedding.
  std::vector<Mat<Scalar>> pos_noise(static_cast<std::size_t>(b));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int i = 0; i < b; ++i)
    sample_gumbel_delta_into<Scalar>(
        stream_key({noise_key, static_cast<std::uint64_t>(i),
                    static_cast<std::uint64_t>(i)}),
        static_cast<Eigen::Index>(img_h) * img_w,
        pos_noise[static_cast<std::size_t>(i)]);

  std::vector<ad::Var<Scalar>> visual;
  std::vector<ad::Var<Scalar>> area_terms;
  Scalar pos_area_sum = Scalar(0);
  for (int i = 0; i < b; ++i) {
    auto mask_graph = image_mask_train(
        grid[static_cast<std::size_t>(i * b + i)], masker.w, masker.b,
        pos_noise[static_cast<std::size_t>(i)], masker_cfg.gumbel_temp, plans,
        st);
    auto masked = ad::mask_channels(
        ad::Var<Scalar>::constant(batch[static_cast<std::size_t>(i)].image.pixels),
        mask_graph.mask);
    visual.push_back(ad::l2_normalize(backends.image->encode_global(masked)));

    auto pos_area = ad::mean(mask_graph.mask);
    pos_area_sum += pos_area.scalar();
    area_terms.push_back(ad::abs_op(
        ad::add_scalar(ad::scale(pos_area, Scalar(-1)), loss_cfg.p_pos)));
  }
  auto sim_i = ad::matmul(ad::transpose(ad::stack_cols(visual)),
                          ad::stack_cols(out.embeddings));
  out.acl_i = info_nce_symmetric(sim_i, loss_cfg.tau);

  // Negative-pair areas through the fused node; same noise stream layout.
  // The per-pair forward work (noise, upsample, Jacobian) writes into slots
  // keyed by pair index, so the parallel loop stays deterministic.
  struct NegSlot {
    int i, j;
    StAreaResult<Scalar> result;
  };
  std::vector<NegSlot> slots;
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < b; ++j)
      if (i != j) slots.push_back({i, j, {}});
  const Scalar w_value = masker.w.scalar(), b_value = masker.b.scalar();
#ifdef _OPENMP
#pragma omp parallel
#endif
  {
    StAreaScratch<Scalar> scratch;
    Mat<Scalar> delta;
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
    for (std::size_t k = 0; k < slots.size(); ++k) {
      auto& slot = slots[k];
      sample_gumbel_delta_into<Scalar>(
          stream_key({noise_key, static_cast<std::uint64_t>(slot.i),
                      static_cast<std::uint64_t>(slot.j)}),
          static_cast<Eigen::Index>(img_h) * img_w, delta);
      slot.result = st_area_precompute(
          grid[static_cast<std::size_t>(slot.i * b + slot.j)].value(), w_value,
          b_value, delta, masker_cfg.gumbel_temp, plans, st, &scratch);
    }
  }
  for (auto& slot : slots) {
    auto area = st_area_node(std::move(slot.result),
                             grid[static_cast<std::size_t>(slot.i * b + slot.j)],
                             masker.w, masker.b);
    area_terms.push_back(ad::abs_op(
        ad::add_scalar(ad::scale(area, Scalar(-1)), loss_cfg.p_neg)));
  }
  out.reg = ad::sum_list(area_terms);

  out.total = ad::sum_list<Scalar>(
      {ad::scale(out.acl_i, loss_cfg.lambda_acl_i),
       ad::scale(out.acl_f, loss_cfg.lambda_acl_f),
       ad::scale(out.reg, loss_cfg.lambda_reg)});

  out.breakdown.acl_i = out.acl_i.scalar();
  out.breakdown.acl_f = out.acl_f.scalar();
  out.breakdown.reg = out.reg.scalar();
  out.breakdown.total = out.total.scalar();
  out.breakdown.mask_area_pos_mean = pos_area_sum / static_cast<Scalar>(b);
  return out;
}

}  // namespace avloc
