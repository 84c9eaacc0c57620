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
#include <cstdint>

#include "avloc/io/pnm.hpp"
#include "avloc/types.hpp"

namespace avloc {

// Fixed 256-entry RGB colormap; overlays are byte-comparable across builds.
const std::array<std::array<std::uint8_t, 3>, 256>& overlay_colormap();

// Alpha-blends the colormap over the image with per-pixel alpha
// 0.5 * confidence: zero confidence leaves the pixel untouched, full
// confidence mixes image and the top colormap color 50/50. The confidence
// grid is resized bilinearly when its shape differs but the aspect ratio
// matches; otherwise the shapes are rejected.
io::Raster render_overlay(const io::Raster& image, const MatD& confidence);

}  // namespace avloc
