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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "avloc/config.hpp"
#include "avloc/data.hpp"
#include "avloc/evaluate.hpp"
#include "avloc/io/checkpoint.hpp"
#include "avloc/io/tensor.hpp"
#include "avloc/overlay.hpp"
#include "avloc/trainlog.hpp"

namespace fs = std::filesystem;
using namespace avloc;

namespace {

// The CLI runs the float32 pipeline: checkpoints are float32 containers, so
// save/load and resume are lossless.
using S = float;

void apply_jobs(int jobs) {
#ifdef _OPENMP
  if (jobs > 0) omp_set_num_threads(jobs);
#else
  (void)jobs;
#endif
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw AvlocError("cannot write " + path.string());
  f << text;
}

void write_resolved_config(const RunConfig& cfg, const fs::path& out_dir) {
  write_text(out_dir / "config.resolved.json", to_json(cfg).dump(2) + "\n");
}

io::Raster confidence_to_raster(const MatD& conf) {
  io::Raster img;
  img.height = static_cast<int>(conf.rows());
  img.width = static_cast<int>(conf.cols());
  img.channels = 1;
  img.data.resize(static_cast<std::size_t>(img.height) * img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      img.at(y, x, 0) = static_cast<std::uint8_t>(
          std::lround(255.0 * std::clamp(conf(y, x), 0.0, 1.0)));
  return img;
}

Pipeline<S> pipeline_from_checkpoint(const RunConfig& cfg,
                                     const std::string& checkpoint_path) {
  Pipeline<S> p;
  p.backends = make_backends<S>(cfg);
  auto loaded = io::load_checkpoint<S>(checkpoint_path);
  p.proj = loaded.state.proj;
  p.masker = loaded.state.masker;
  return p;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              int jobs) {
  RunConfig cfg = load_run_config(config_path);
  if (cfg.data.train_manifest.empty())
    throw ConfigError("invalid config value: data.train_manifest is required "
                      "for train");
  apply_jobs(jobs > 0 ? jobs : cfg.jobs);
  fs::create_directories(out_dir);
  write_resolved_config(cfg, out_dir);

  auto backends = make_backends<S>(cfg);
  Dataset dataset = load_manifest(cfg.data.train_manifest, Split::kTrain);
  SampleLoader<S> loader(backends, image_preprocess_config(cfg),
                         audio_preprocess_config(cfg),
                         fs::path(cfg.data.train_manifest).parent_path()
                             .string());
  auto samples = loader.load_all(dataset);

  auto tcfg = train_config<S>(cfg);
  TrainState<S> state = TrainState<S>::init(
      tcfg, masker_params<S>(cfg), cfg.backends.audio_dim,
      cfg.backends.token_dim);

  std::ofstream log(fs::path(out_dir) / "metrics.jsonl");
  if (!log) throw AvlocError("cannot write metrics log");
  const nlohmann::json snapshot = to_json(cfg);

  TrainHooks<S> hooks;
  hooks.on_step = [&](const StepRecord& rec) {
    log << to_log_line(rec) << "\n";
  };
  hooks.on_epoch_end = [&](const TrainState<S>& s, int epoch) {
    if ((epoch + 1) % cfg.train.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%04d.ckpt",
                    epoch + 1);
      io::save_checkpoint(fs::path(out_dir) / name, s, snapshot);
    }
  };
  train(state, samples, backends, tcfg, hooks);
  io::save_checkpoint((fs::path(out_dir) / "checkpoint_final.ckpt").string(),
                      state, snapshot);
  std::cout << "training complete: " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint,
             const std::string& manifest, const std::string& out_dir,
             int jobs) {
  RunConfig cfg = load_run_config(config_path);
  apply_jobs(jobs > 0 ? jobs : cfg.jobs);
  fs::create_directories(out_dir);
  write_resolved_config(cfg, out_dir);

  Pipeline<S> pipeline = pipeline_from_checkpoint(cfg, checkpoint);
  Dataset dataset = load_manifest(manifest, Split::kTest);
  SampleLoader<S> loader(pipeline.backends, image_preprocess_config(cfg),
                         audio_preprocess_config(cfg),
                         fs::path(manifest).parent_path().string());

  InferenceConfig<S> icfg;
  icfg.threshold = static_cast<S>(cfg.inference.threshold);
  icfg.rule = inference_rule(cfg);
  EvalReport report = evaluate(dataset, loader, pipeline, icfg, to_json(cfg));

  write_text(fs::path(out_dir) / "report.json", report.to_json().dump(2) + "\n");
  if (cfg.output.per_sample_csv)
    write_text(fs::path(out_dir) / "per_sample.csv", report.to_csv());

  for (const auto& [name, value] : report.metrics.items())
    std::printf("%-8s %.2f\n", name.c_str(), 100.0 * value.get<double>());
  return 0;
}

int cmd_infer(const std::string& config_path, const std::string& checkpoint,
              const std::string& image_path, const std::string& audio_path,
              const std::string& out_dir, int jobs) {
  RunConfig cfg = load_run_config(config_path);
  apply_jobs(jobs > 0 ? jobs : cfg.jobs);
  fs::create_directories(out_dir);
  write_resolved_config(cfg, out_dir);

  Pipeline<S> pipeline = pipeline_from_checkpoint(cfg, checkpoint);
  ImageTensor<S> image = preprocess_image<S>(io::read_pnm(image_path),
                                             image_preprocess_config(cfg));
  io::WavData wav = io::read_wav(audio_path);
  AudioSegment<S> audio = preprocess_audio<S>(wav.samples, wav.sample_rate,
                                              audio_preprocess_config(cfg));
  Mat<S> features = pipeline.backends.audio->encode(audio);

  InferenceConfig<S> icfg;
  icfg.threshold = static_cast<S>(cfg.inference.threshold);
  icfg.rule = inference_rule(cfg);
  auto result = pipeline.localize(image, features, icfg);

  MatD conf = result.confidence.cast<double>();
  io::write_pgm((fs::path(out_dir) / "confidence.pgm").string(),
                confidence_to_raster(conf));
  io::write_tensor((fs::path(out_dir) / "confidence.avt").string(),
                   result.confidence);
  MatD binary = result.binary.cast<double>();
  io::Raster bin_img = confidence_to_raster(binary);
  io::write_pgm((fs::path(out_dir) / "binary.pgm").string(), bin_img);

  if (cfg.inference.threshold > 1.0)
    std::cerr << "warning: inference.threshold " << cfg.inference.threshold
              << " exceeds 1; the binary map is empty\n";
  std::cout << "confidence max " << conf.maxCoeff() << ", sounding fraction "
            << binary.mean() << "\n";
  return 0;
}

int cmd_visualize(const std::string& image_path,
                  const std::string& confidence_path,
                  const std::string& out_path) {
  io::Raster image = io::read_pnm(image_path);
  MatF conf = io::read_tensor(confidence_path);
  io::Raster overlay = render_overlay(image, conf.cast<double>());
  io::write_ppm(out_path, overlay);
  std::cout << "overlay written: " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "avloc: self-supervised sound source localization with frozen "
      "image-text backbones"};
  app.require_subcommand(1);
  int jobs = 0;
  app.add_option("--jobs", jobs,
                 "worker threads for per-sample work (default: all cores)");

  std::string config_path, out_dir, checkpoint, manifest, image_path,
      audio_path, confidence_path;

  auto* train_cmd =
      app.add_subcommand("train", "train maskers and the audio projector");
  train_cmd->add_option("--config", config_path, "run config JSON")
      ->required();
  train_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* eval_cmd =
      app.add_subcommand("eval", "score a checkpoint against a manifest");
  eval_cmd->add_option("--config", config_path, "run config JSON")->required();
  eval_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint")
      ->required();
  eval_cmd->add_option("--manifest", manifest, "evaluation manifest")
      ->required();
  eval_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* infer_cmd =
      app.add_subcommand("infer", "localize one image/audio pair");
  infer_cmd->add_option("--config", config_path, "run config JSON")
      ->required();
  infer_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint")
      ->required();
  infer_cmd->add_option("--image", image_path, "input image (PPM)")
      ->required();
  infer_cmd->add_option("--audio", audio_path, "input audio (WAV)")
      ->required();
  infer_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* vis_cmd =
      app.add_subcommand("visualize", "blend a confidence map over an image");
  vis_cmd->add_option("--image", image_path, "input image (PPM)")->required();
  vis_cmd->add_option("--confidence", confidence_path,
                      "confidence tensor (.avt)")
      ->required();
  vis_cmd->add_option("--out", out_dir, "output overlay image (PPM)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(config_path, out_dir, jobs);
    if (eval_cmd->parsed())
      return cmd_eval(config_path, checkpoint, manifest, out_dir, jobs);
    if (infer_cmd->parsed())
      return cmd_infer(config_path, checkpoint, image_path, audio_path,
                       out_dir, jobs);
    if (vis_cmd->parsed())
      return cmd_visualize(image_path, confidence_path, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
