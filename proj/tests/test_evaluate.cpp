#include <doctest.h>

#include <fstream>

#include "avloc/evaluate.hpp"
#include "avloc/planted.hpp"
#include "test_support.hpp"

using namespace avloc;

namespace {

ToyBackendConfig eval_backend_config() {
  ToyBackendConfig cfg;
  cfg.seed = 55;
  cfg.input_size = 32;
  cfg.patch_grid = 4;
  cfg.spatial_dim = 6;
  cfg.clip_dim = 6;
  cfg.audio_dim = 5;
  cfg.spectrogram_bins = 4;
  cfg.token_dim = 3;
  return cfg;
}

PlantedConfig eval_planted_config() {
  PlantedConfig p;
  p.num_samples = 6;
  p.num_classes = 3;
  p.image_size = 32;
  p.grid = 4;
  p.duration = 2.0;  // short clips keep the suite fast
  p.seed = 12;
  return p;
}

struct EvalFixture {
  test::TempDir tmp{"eval"};
  ToyBackendConfig toy = eval_backend_config();
  BackendSet<float> backends = make_toy_backends<float>(toy);
  ImagePreprocessConfig image_cfg;
  AudioPreprocessConfig audio_cfg;
  Pipeline<float> pipeline;

  EvalFixture() {
    image_cfg.size = toy.input_size;
    image_cfg.mean = {0, 0, 0};
    image_cfg.std = {1, 1, 1};
    audio_cfg.duration = 2.0;
    pipeline.backends = backends;
    pipeline.proj = ProjectionParams<float>::init(3, toy.audio_dim, 4,
                                                  toy.token_dim);
    pipeline.masker = MaskerParams<float>{};
  }

  SampleLoader<float> loader() {
    return SampleLoader<float>(backends, image_cfg, audio_cfg,
                               tmp.path().string());
  }
};

}  // namespace

TEST_CASE("evaluate: box-annotated manifest reports cIoU and AUC only") {
  EvalFixture fx;
  make_planted_dataset(fx.tmp.path().string(), eval_planted_config());
  auto ds = load_manifest(fx.tmp.file("manifest.jsonl"), Split::kTest);
  auto loader = fx.loader();
  auto report = evaluate(ds, loader, fx.pipeline, InferenceConfig<float>{});
  CHECK(report.metrics.contains("cIoU"));
  CHECK(report.metrics.contains("AUC"));
  CHECK_FALSE(report.metrics.contains("mIoU"));
  CHECK_FALSE(report.metrics.contains("AP"));
  CHECK(report.per_sample.size() == 6);
  const double ciou = report.metrics["cIoU"].get<double>();
  CHECK(ciou >= 0.0);
  CHECK(ciou <= 1.0);
}

TEST_CASE("evaluate: pixel-mask manifest reports mIoU and F-score only") {
  EvalFixture fx;
  auto truth =
      make_planted_dataset(fx.tmp.path().string(), eval_planted_config());
  auto boxes_ds = load_manifest(fx.tmp.file("manifest.jsonl"), Split::kTest);

  // Rewrite annotations as pixel masks.
  Dataset ds = boxes_ds;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& box = truth[i].box;
    io::Raster mask;
    mask.width = mask.height = 32;
    mask.channels = 1;
    mask.data.assign(32 * 32, 0);
    for (int y = static_cast<int>(box[1]); y < static_cast<int>(box[3]); ++y)
      for (int x = static_cast<int>(box[0]); x < static_cast<int>(box[2]); ++x)
        mask.at(y, x, 0) = 255;
    const std::string rel = "masks_" + ds.records[i].id + ".pgm";
    io::write_pgm(fx.tmp.file(rel), mask);
    ds.records[i].boxes.clear();
    ds.records[i].mask_path = rel;
  }

  auto loader = fx.loader();
  auto report = evaluate(ds, loader, fx.pipeline, InferenceConfig<float>{});
  CHECK(report.metrics.contains("mIoU"));
  CHECK(report.metrics.contains("F-score"));
  CHECK_FALSE(report.metrics.contains("cIoU"));
}

TEST_CASE("evaluate: mixed polarity adds the detection metrics") {
  EvalFixture fx;
  make_planted_dataset(fx.tmp.path().string(), eval_planted_config());
  auto ds = load_manifest(fx.tmp.file("manifest.jsonl"), Split::kTest);
  // Relabel half the samples as negatives (annotations stay on positives).
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (i % 2 == 1) {
      ds.records[i].polarity = (i % 4 == 1) ? Polarity::kNonAudible
                                            : Polarity::kMismatched;
      ds.records[i].boxes.clear();
    }
  }
  auto loader = fx.loader();
  auto report = evaluate(ds, loader, fx.pipeline, InferenceConfig<float>{});
  CHECK(report.metrics.contains("AP"));
  CHECK(report.metrics.contains("max-F1"));
  CHECK(report.metrics.contains("LocAcc"));
  CHECK(report.metrics.contains("cIoU"));  // positives still carry boxes
}

TEST_CASE("evaluate: mixed polarity requires annotated positives") {
  EvalFixture fx;
  make_planted_dataset(fx.tmp.path().string(), eval_planted_config());
  auto ds = load_manifest(fx.tmp.file("manifest.jsonl"), Split::kTest);
  ds.records[0].boxes.clear();  // positive without annotation
  ds.records[1].polarity = Polarity::kNonVisible;
  ds.records[1].boxes.clear();
  auto loader = fx.loader();
  CHECK_THROWS_WITH_AS(
      evaluate(ds, loader, fx.pipeline, InferenceConfig<float>{}),
      doctest::Contains("positive sample without annotation"),
      ValidationError);
}

TEST_CASE("evaluate: empty or annotation-free datasets are errors") {
  EvalFixture fx;
  make_planted_dataset(fx.tmp.path().string(), eval_planted_config());
  auto loader = fx.loader();
  Dataset empty;
  CHECK_THROWS_AS(evaluate(empty, loader, fx.pipeline,
                           InferenceConfig<float>{}),
                  ValidationError);

  auto ds = load_manifest(fx.tmp.file("manifest.jsonl"), Split::kTest);
  for (auto& rec : ds.records) rec.boxes.clear();
  CHECK_THROWS_WITH_AS(
      evaluate(ds, loader, fx.pipeline, InferenceConfig<float>{}),
      doctest::Contains("no annotations"), ValidationError);
}

TEST_CASE("evaluate: report JSON and CSV carry per-sample rows") {
  EvalFixture fx;
  make_planted_dataset(fx.tmp.path().string(), eval_planted_config());
  auto ds = load_manifest(fx.tmp.file("manifest.jsonl"), Split::kTest);
  auto loader = fx.loader();
  nlohmann::json echo = {{"threshold", 0.5}};
  auto report =
      evaluate(ds, loader, fx.pipeline, InferenceConfig<float>{}, echo);
  auto j = report.to_json();
  CHECK(j["per_sample"].size() == 6);
  CHECK(j["config"]["threshold"] == 0.5);
  CHECK(j.contains("auc_threshold_grid"));
  auto csv = report.to_csv();
  CHECK(csv.find("id,iou,confidence_score") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}
