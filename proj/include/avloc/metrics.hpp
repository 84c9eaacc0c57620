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

#include <string>
#include <vector>

#include "avloc/manifest.hpp"
#include "avloc/types.hpp"

// Benchmark metrics over binary localization maps: consensus IoU with its
// threshold-grid AUC, pixel segmentation scores, and the detection-style
// protocol for mixed-polarity benchmarks. All maps are H x W with values in
// {0, 1}; annotations are resolved to map resolution first.
namespace avloc {

// Rasterizes half-open boxes given in original-image pixels onto an
// out_h x out_w grid: a pixel is covered when its center falls inside the
// scaled box.
MatD rasterize_boxes(const std::vector<Box>& boxes, int orig_w, int orig_h,
                     int out_w, int out_h);

// Nearest-neighbor resample of a binary mask, preserving {0, 1}.
MatD resample_binary(const MatD& mask, int out_h, int out_w);

// |pred AND gt| / |pred OR gt|; 1 when both are empty.
double sample_iou(const MatD& binary_map, const MatD& gt_mask);

struct CiouAuc {
  double ciou = 0;  // fraction of samples with IoU >= 0.5
  double auc = 0;   // mean success over thresholds 0.05, 0.10, ..., 0.95
};
CiouAuc ciou_auc(const std::vector<double>& ious);

inline constexpr int kAucThresholdCount = 19;
inline constexpr double kAucThresholdStep = 0.05;

struct SegMetrics {
  double miou = 0;
  double fscore = 0;  // beta^2 = 0.3 over aggregated pixel counts
};
SegMetrics segmentation_metrics(const std::vector<MatD>& binary_maps,
                                const std::vector<MatD>& gt_masks);

struct ExtendedSample {
  double confidence_score = 0;
  Polarity polarity = Polarity::kPositive;
  double iou = 0;  // meaningful for positive-polarity samples only
};

struct ExtendedMetrics {
  double ap = 0;
  double max_f1 = 0;
  double loc_acc = 0;  // IoU >= 0.5 fraction among positive samples
};
// Sweeps the detection threshold over all observed scores; a prediction is a
// true positive when the sample is positive-polarity and its IoU >= 0.5.
ExtendedMetrics extended_metrics(const std::vector<ExtendedSample>& samples);

}  // namespace avloc
