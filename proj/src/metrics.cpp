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

#include "avloc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "avloc/resize.hpp"

namespace avloc {

MatD rasterize_boxes(const std::vector<Box>& boxes, int orig_w, int orig_h,
                     int out_w, int out_h) {
  if (orig_w < 1 || orig_h < 1)
    throw ValidationError("rasterize_boxes: empty original image");
  MatD mask = MatD::Zero(out_h, out_w);
  const double sx = static_cast<double>(out_w) / orig_w;
  const double sy = static_cast<double>(out_h) / orig_h;
  for (const auto& b : boxes) {
    const double x0 = b[0] * sx, y0 = b[1] * sy;
    const double x1 = b[2] * sx, y1 = b[3] * sy;
    for (int y = 0; y < out_h; ++y) {
      const double cy = y + 0.5;
      if (cy < y0 || cy >= y1) continue;
      for (int x = 0; x < out_w; ++x) {
        const double cx = x + 0.5;
        if (cx >= x0 && cx < x1) mask(y, x) = 1.0;
      }
    }
  }
  return mask;
}

MatD resample_binary(const MatD& mask, int out_h, int out_w) {
  if (mask.rows() == out_h && mask.cols() == out_w) return mask;
  return resize_nearest(mask, out_h, out_w);
}

double sample_iou(const MatD& binary_map, const MatD& gt_mask) {
  if (binary_map.rows() != gt_mask.rows() ||
      binary_map.cols() != gt_mask.cols())
    throw ValidationError("sample_iou: resolution mismatch");
  double inter = 0, uni = 0;
  for (Eigen::Index r = 0; r < binary_map.rows(); ++r)
    for (Eigen::Index c = 0; c < binary_map.cols(); ++c) {
      const bool p = binary_map(r, c) > 0.5;
      const bool g = gt_mask(r, c) > 0.5;
      inter += (p && g) ? 1 : 0;
      uni += (p || g) ? 1 : 0;
    }
  if (uni == 0) return 1.0;
  return inter / uni;
}

CiouAuc ciou_auc(const std::vector<double>& ious) {
  if (ious.empty()) throw ValidationError("ciou_auc: empty IoU list");
  CiouAuc out;
  const double n = static_cast<double>(ious.size());
  for (double iou : ious)
    if (iou >= 0.5) out.ciou += 1.0;
  out.ciou /= n;
  for (int k = 1; k <= kAucThresholdCount; ++k) {
    const double thr = k * kAucThresholdStep;
    double success = 0;
    for (double iou : ious)
      // Grid values like 0.6 are not exactly representable; the epsilon
      // keeps an IoU equal to a grid threshold (in decimal) counted.
      if (iou >= thr - 1e-12) success += 1.0;
    out.auc += success / n;
  }
  out.auc /= kAucThresholdCount;
  return out;
}

SegMetrics segmentation_metrics(const std::vector<MatD>& binary_maps,
                                const std::vector<MatD>& gt_masks) {
  if (binary_maps.empty() || binary_maps.size() != gt_masks.size())
    throw ValidationError("segmentation_metrics: batch size mismatch");
  SegMetrics out;
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < binary_maps.size(); ++i) {
    out.miou += sample_iou(binary_maps[i], gt_masks[i]);
    const auto& pred = binary_maps[i];
    const auto& gt = gt_masks[i];
    for (Eigen::Index r = 0; r < pred.rows(); ++r)
      for (Eigen::Index c = 0; c < pred.cols(); ++c) {
        const bool p = pred(r, c) > 0.5;
        const bool g = gt(r, c) > 0.5;
        tp += (p && g) ? 1 : 0;
        fp += (p && !g) ? 1 : 0;
        fn += (!p && g) ? 1 : 0;
      }
  }
  out.miou /= static_cast<double>(binary_maps.size());
  constexpr double kBeta2 = 0.3;
  if (tp > 0) {
    const double precision = tp / (tp + fp);
    const double recall = tp / (tp + fn);
    out.fscore = (1.0 + kBeta2) * precision * recall /
                 (kBeta2 * precision + recall);
  }
  return out;
}

ExtendedMetrics extended_metrics(const std::vector<ExtendedSample>& samples) {
  if (samples.empty())
    throw ValidationError("extended_metrics: empty sample list");
  double n_pos = 0, n_pos_localized = 0;
  for (const auto& s : samples)
    if (s.polarity == Polarity::kPositive) {
      n_pos += 1;
      if (s.iou >= 0.5) n_pos_localized += 1;
    }
  if (n_pos == 0)
    throw ValidationError(
        "extended_metrics: no positive-polarity samples; LocAcc undefined");

  // Threshold sweep over all observed scores, descending; recall is then
  // nondecreasing and AP accumulates by step interpolation.
  std::set<double, std::greater<double>> thresholds;
  for (const auto& s : samples) thresholds.insert(s.confidence_score);

  ExtendedMetrics out;
  double prev_recall = 0;
  for (double thr : thresholds) {
    double tp = 0, predicted = 0;
    for (const auto& s : samples) {
      if (s.confidence_score < thr) continue;
      predicted += 1;
      if (s.polarity == Polarity::kPositive && s.iou >= 0.5) tp += 1;
    }
    const double precision = predicted > 0 ? tp / predicted : 0.0;
    const double recall = tp / n_pos;
    out.ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    if (precision + recall > 0)
      out.max_f1 = std::max(
          out.max_f1, 2.0 * precision * recall / (precision + recall));
  }
  out.loc_acc = n_pos_localized / n_pos;
  return out;
}

}  // namespace avloc
