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

#include <array>

#include "avloc/io/pnm.hpp"
#include "avloc/resize.hpp"
#include "avloc/types.hpp"

namespace avloc {

// Channels-first image, stored as a 3 x (h*w) matrix with flat row-major
// pixel index p = y*w + x.
template <typename Scalar>
struct ImageTensor {
  Mat<Scalar> pixels;  // 3 x (h*w)
  int height = 0;
  int width = 0;
};

struct ImagePreprocessConfig {
  int size = 352;
  // CLIP preprocessing constants; toy runs typically override with identity
  // (mean 0, std 1) via config.
  std::array<double, 3> mean = {0.48145466, 0.4578275, 0.40821073};
  std::array<double, 3> std = {0.26862954, 0.26130258, 0.27577711};
};

// Bilinear resize to size x size, then per-channel (v - mean) / std on
// [0, 1]-scaled intensities. Deterministic.
template <typename Scalar>
ImageTensor<Scalar> preprocess_image(const io::Raster& raw,
                                     const ImagePreprocessConfig& cfg = {}) {
  if (raw.channels != 3)
    throw ValidationError("preprocess_image: expected 3-channel input");
  if (raw.width < 1 || raw.height < 1)
    throw ValidationError("preprocess_image: empty image");

  ImageTensor<Scalar> out;
  out.height = out.width = cfg.size;
  out.pixels.resize(3, static_cast<Eigen::Index>(cfg.size) * cfg.size);
  for (int c = 0; c < 3; ++c) {
    Mat<double> plane(raw.height, raw.width);
    for (int y = 0; y < raw.height; ++y)
      for (int x = 0; x < raw.width; ++x)
        plane(y, x) = raw.at(y, x, c) / 255.0;
    Mat<double> resized = resize_bilinear(plane, cfg.size, cfg.size);
    for (int y = 0; y < cfg.size; ++y)
      for (int x = 0; x < cfg.size; ++x)
        out.pixels(c, static_cast<Eigen::Index>(y) * cfg.size + x) =
            static_cast<Scalar>((resized(y, x) - cfg.mean[c]) / cfg.std[c]);
  }
  return out;
}

}  // namespace avloc
