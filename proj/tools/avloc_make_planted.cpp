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

// Generates the synthetic planted-signal dataset used by the examples in the
// README and by the verification suites.

#include <iostream>

#include <CLI11.hpp>

#include "avloc/planted.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate a planted-signal toy dataset"};
  std::string out_dir;
  avloc::PlantedConfig cfg;
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--samples", cfg.num_samples, "number of pairs");
  app.add_option("--classes", cfg.num_classes, "number of classes");
  app.add_option("--image-size", cfg.image_size, "image side in pixels");
  app.add_option("--grid", cfg.grid, "grid cells per side");
  app.add_option("--seconds", cfg.duration, "audio length in seconds");
  app.add_option("--seed", cfg.seed, "dataset seed");
  CLI11_PARSE(app, argc, argv);

  try {
    auto truth = avloc::make_planted_dataset(out_dir, cfg);
    std::cout << "wrote " << truth.size() << " pairs under " << out_dir
              << " (manifest.jsonl)\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
