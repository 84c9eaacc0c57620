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
#include <optional>
#include <string>
#include <vector>

namespace avloc {

// [x_min, y_min, x_max, y_max] in pixels of the original image, half-open.
using Box = std::array<double, 4>;

enum class Polarity { kPositive, kNonAudible, kNonVisible, kMismatched };

std::string to_string(Polarity p);
Polarity polarity_from_string(const std::string& s);

struct SampleRecord {
  std::string id;
  std::string image_path;
  std::string audio_path;
  std::vector<Box> boxes;        // box annotation, empty if absent
  std::string mask_path;         // pixel-mask annotation, empty if absent
  Polarity polarity = Polarity::kPositive;

  bool has_boxes() const { return !boxes.empty(); }
  bool has_mask() const { return !mask_path.empty(); }
  bool has_annotation() const { return has_boxes() || has_mask(); }
};

enum class Split { kTrain, kTest };

struct Dataset {
  std::vector<SampleRecord> records;
  Split split = Split::kTrain;
};

// Parses a line-delimited JSON manifest. Keys: id, image_path, audio_path
// (required); boxes, mask_path, polarity (optional). Errors carry the
// offending line number; duplicate ids are rejected.
Dataset load_manifest(const std::string& path, Split split = Split::kTrain);
Dataset parse_manifest(const std::string& text, Split split = Split::kTrain,
                       const std::string& origin = "<memory>");

// Inverse of parse_manifest, one JSON object per line.
std::string serialize_manifest(const Dataset& dataset);

}  // namespace avloc
