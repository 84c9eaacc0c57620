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
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "avloc/io/pnm.hpp"
#include "avloc/io/wav.hpp"
#include "avloc/manifest.hpp"
#include "avloc/rng.hpp"

namespace avloc {

// Synthetic dataset where the correct localization is known by construction:
// each image carries one bright class-colored patch in a class-determined
// grid cell, each audio is the class tone. Patches align with the toy image
// encoder's grid so the planted cell is exactly one spatial feature.
struct PlantedConfig {
  int num_samples = 64;
  int num_classes = 4;
  int image_size = 352;
  int grid = 8;
  int sample_rate = 16000;
  double duration = 10.0;
  // Class k tone = (k+1) * tone_base_hz, matching the toy spectrogram bins.
  double tone_base_hz = 50.0;
  double tone_amplitude = 0.9;
  double background = 0.08;
  std::uint64_t seed = 5;
};

struct PlantedSample {
  std::string id;
  int class_id = 0;
  Box box;  // planted patch in image pixels, half-open
};

inline void planted_cell(const PlantedConfig& cfg, int class_id, int* row,
                         int* col) {
  *row = (1 + 3 * class_id) % cfg.grid;
  *col = (2 + 5 * class_id) % cfg.grid;
}

// Equal-luma palette: every class color sums to the same channel total, so
// class identity lives purely in chroma. Shared-brightness pressure on the
// embeddings then cannot erase the class-distinctive logit components.
inline void planted_color(int class_id, double* r, double* g, double* b) {
  static const double palette[][3] = {{0.80, 0.20, 0.20},
                                      {0.20, 0.80, 0.20},
                                      {0.20, 0.20, 0.80},
                                      {0.60, 0.60, 0.00},
                                      {0.00, 0.60, 0.60},
                                      {0.60, 0.00, 0.60}};
  const auto n = sizeof(palette) / sizeof(palette[0]);
  *r = palette[static_cast<std::size_t>(class_id) % n][0];
  *g = palette[static_cast<std::size_t>(class_id) % n][1];
  *b = palette[static_cast<std::size_t>(class_id) % n][2];
}

// Writes images/, audio/, and manifest.jsonl under dir; returns the ground
// truth. Deterministic given the config.
inline std::vector<PlantedSample> make_planted_dataset(
    const std::string& dir, const PlantedConfig& cfg = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "audio");

  const int cell = cfg.image_size / cfg.grid;
  std::vector<PlantedSample> truth;
  Dataset manifest;

  for (int idx = 0; idx < cfg.num_samples; ++idx) {
    const int class_id = idx % cfg.num_classes;
    Rng rng(stream_key({cfg.seed, static_cast<std::uint64_t>(idx)}));

    int prow = 0, pcol = 0;
    planted_cell(cfg, class_id, &prow, &pcol);
    double cr = 0, cg = 0, cb = 0;
    planted_color(class_id, &cr, &cg, &cb);
    const double jitter = rng.next_uniform(-0.04, 0.04);

    io::Raster img;
    img.width = img.height = cfg.image_size;
    img.channels = 3;
    img.data.resize(static_cast<std::size_t>(cfg.image_size) *
                    cfg.image_size * 3);
    for (int y = 0; y < cfg.image_size; ++y)
      for (int x = 0; x < cfg.image_size; ++x) {
        const bool inside = y >= prow * cell && y < (prow + 1) * cell &&
                            x >= pcol * cell && x < (pcol + 1) * cell;
        double r, g, b;
        if (inside) {
          r = cr + jitter;
          g = cg + jitter;
          b = cb + jitter;
        } else {
          r = g = b = cfg.background + rng.next_uniform(-0.03, 0.03);
        }
        auto q = [](double v) {
          return static_cast<std::uint8_t>(
              std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        };
        img.at(y, x, 0) = q(r);
        img.at(y, x, 1) = q(g);
        img.at(y, x, 2) = q(b);
      }

    const double freq = (class_id + 1) * cfg.tone_base_hz;
    const double phase = rng.next_uniform(0.0, 2.0 * M_PI);
    const auto n_samples = static_cast<std::size_t>(
        std::llround(cfg.sample_rate * cfg.duration));
    std::vector<double> tone(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i)
      tone[i] = cfg.tone_amplitude *
                std::sin(2.0 * M_PI * freq * static_cast<double>(i) /
                             cfg.sample_rate +
                         phase);

    const std::string id = "planted_" + std::to_string(idx);
    const std::string image_rel = "images/" + id + ".ppm";
    const std::string audio_rel = "audio/" + id + ".wav";
    io::write_ppm((fs::path(dir) / image_rel).string(), img);
    io::write_wav((fs::path(dir) / audio_rel).string(), tone,
                  cfg.sample_rate);

    PlantedSample gt;
    gt.id = id;
    gt.class_id = class_id;
    gt.box = {static_cast<double>(pcol * cell), static_cast<double>(prow * cell),
              static_cast<double>((pcol + 1) * cell),
              static_cast<double>((prow + 1) * cell)};
    truth.push_back(gt);

    SampleRecord rec;
    rec.id = id;
    rec.image_path = image_rel;
    rec.audio_path = audio_rel;
    rec.boxes = {gt.box};
    manifest.records.push_back(rec);
  }

  std::ofstream mf(fs::path(dir) / "manifest.jsonl");
  mf << serialize_manifest(manifest);
  return truth;
}

}  // namespace avloc
