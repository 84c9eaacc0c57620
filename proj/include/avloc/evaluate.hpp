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

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "avloc/data.hpp"
#include "avloc/embedder.hpp"
#include "avloc/masks.hpp"
#include "avloc/metrics.hpp"

namespace avloc {

template <typename Scalar>
struct InferenceConfig {
  Scalar threshold = Scalar(0.5);
  InferenceRule rule = InferenceRule::kPaper;
};

// Trained pieces needed to localize: frozen backends plus the learned
// projection and masker scalars.
template <typename Scalar>
struct Pipeline {
  BackendSet<Scalar> backends;
  ProjectionParams<Scalar> proj;
  MaskerParams<Scalar> masker;

  Vec<Scalar> embed(const Mat<Scalar>& audio_features) const {
    return embed_audio_features(audio_features,
                                ProjectionVars<Scalar>::constants(proj),
                                backends)
        .value();
  }

  InferenceResult<Scalar> localize(const ImageTensor<Scalar>& image,
                                   const Mat<Scalar>& audio_features,
                                   const InferenceConfig<Scalar>& cfg) const {
    Vec<Scalar> a = embed(audio_features);
    auto encoded = backends.image->encode(image);
    Mat<Scalar> logits = backends.grounder->ground(encoded.second, a);
    return inference_mask(logits, masker, cfg.threshold, image.height,
                          image.width, cfg.rule);
  }
};

struct PerSampleResult {
  std::string id;
  double iou = std::numeric_limits<double>::quiet_NaN();
  double confidence_score = 0;
};

struct EvalReport {
  nlohmann::ordered_json metrics;  // 0-1 scale
  std::vector<PerSampleResult> per_sample;
  nlohmann::json config_echo;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["metrics"] = metrics;
    j["auc_threshold_grid"] = "iou thresholds 0.05 to 0.95, step 0.05 (19-point average)";
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& s : per_sample) {
      nlohmann::ordered_json row;
      row["id"] = s.id;
      if (std::isnan(s.iou))
        row["iou"] = nullptr;
      else
        row["iou"] = s.iou;
      row["confidence_score"] = s.confidence_score;
      rows.push_back(row);
    }
    j["per_sample"] = rows;
    j["config"] = config_echo;
    return j;
  }

  std::string to_csv() const {
    std::string out = "id,iou,confidence_score\n";
    for (const auto& s : per_sample) {
      out += s.id;
      out += ",";
      out += std::isnan(s.iou) ? std::string() : std::to_string(s.iou);
      out += ",";
      out += std::to_string(s.confidence_score);
      out += "\n";
    }
    return out;
  }
};

// Runs inference over a manifest and dispatches to the metrics implied by
// the annotation kinds present: boxes -> cIoU/AUC, pixel masks ->
// mIoU/F-score, mixed polarity -> AP/max-F1/LocAcc.
template <typename Scalar>
EvalReport evaluate(const Dataset& dataset, SampleLoader<Scalar>& loader,
                    const Pipeline<Scalar>& pipeline,
                    const InferenceConfig<Scalar>& inference_cfg,
                    nlohmann::json config_echo = {}) {
  if (dataset.records.empty())
    throw ValidationError("evaluate: empty dataset");

  EvalReport report;
  report.config_echo = std::move(config_echo);

  std::vector<double> box_ious;
  std::vector<MatD> seg_pred, seg_gt;
  std::vector<ExtendedSample> extended;
  bool any_negative_polarity = false;

  for (const auto& rec : dataset.records) {
    io::Raster raster = io::read_pnm(
        resolve_path(loader.base_dir(), rec.image_path));
    ImageTensor<Scalar> image = loader.preprocess(raster);
    const BatchSample<Scalar>& cached = loader.load(rec);
    auto result = pipeline.localize(image, cached.audio_features,
                                    inference_cfg);

    MatD binary = result.binary.template cast<double>();
    PerSampleResult row;
    row.id = rec.id;
    row.confidence_score =
        static_cast<double>(result.confidence.maxCoeff());

    std::optional<MatD> gt;
    if (rec.has_boxes()) {
      gt = rasterize_boxes(rec.boxes, raster.width, raster.height,
                           image.width, image.height);
    } else if (rec.has_mask()) {
      io::Raster m = io::read_pnm(resolve_path(loader.base_dir(),
                                               rec.mask_path));
      if (m.channels != 1)
        throw ValidationError("evaluate: pixel mask must be grayscale: " +
                              rec.mask_path);
      MatD mask(m.height, m.width);
      for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
          mask(y, x) = m.at(y, x, 0) >= 128 ? 1.0 : 0.0;
      gt = resample_binary(mask, image.height, image.width);
    }

    if (gt) {
      row.iou = sample_iou(binary, *gt);
      if (rec.polarity == Polarity::kPositive) {
        if (rec.has_boxes()) box_ious.push_back(row.iou);
        if (rec.has_mask()) {
          seg_pred.push_back(binary);
          seg_gt.push_back(*gt);
        }
      }
    }

    if (rec.polarity != Polarity::kPositive) {
      any_negative_polarity = true;
    } else if (!gt && !rec.has_annotation()) {
      // Tolerated unless the extended protocol is requested below.
    }

    ExtendedSample ext;
    ext.confidence_score = row.confidence_score;
    ext.polarity = rec.polarity;
    ext.iou = std::isnan(row.iou) ? 0.0 : row.iou;
    extended.push_back(ext);

    report.per_sample.push_back(row);
  }

  if (any_negative_polarity) {
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
      const auto& rec = dataset.records[i];
      if (rec.polarity == Polarity::kPositive && !rec.has_annotation())
        throw ValidationError(
            "evaluate: positive sample without annotation in a "
            "mixed-polarity dataset: " + rec.id);
    }
  }

  if (!box_ious.empty()) {
    auto m = ciou_auc(box_ious);
    report.metrics["cIoU"] = m.ciou;
    report.metrics["AUC"] = m.auc;
  }
  if (!seg_pred.empty()) {
    auto m = segmentation_metrics(seg_pred, seg_gt);
    report.metrics["mIoU"] = m.miou;
    report.metrics["F-score"] = m.fscore;
  }
  if (any_negative_polarity) {
    auto m = extended_metrics(extended);
    report.metrics["AP"] = m.ap;
    report.metrics["max-F1"] = m.max_f1;
    report.metrics["LocAcc"] = m.loc_acc;
  }
  if (report.metrics.empty())
    throw ValidationError(
        "evaluate: no annotations present; nothing to score");
  return report;
}

}  // namespace avloc
