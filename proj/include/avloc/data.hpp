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

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "avloc/audio.hpp"
#include "avloc/image.hpp"
#include "avloc/io/pnm.hpp"
#include "avloc/io/wav.hpp"
#include "avloc/losses.hpp"
#include "avloc/manifest.hpp"

namespace avloc {

// Resolves a manifest-relative path.
inline std::string resolve_path(const std::string& base_dir,
                                const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

// Loads and preprocesses manifest samples into model-ready tensors. Decoded
// samples are cached by id; training revisits every sample each epoch.
template <typename Scalar>
class SampleLoader {
 public:
  SampleLoader(const BackendSet<Scalar>& backends,
               ImagePreprocessConfig image_cfg, AudioPreprocessConfig audio_cfg,
               std::string base_dir)
      : backends_(backends),
        image_cfg_(image_cfg),
        audio_cfg_(audio_cfg),
        base_dir_(std::move(base_dir)) {}

  ImageTensor<Scalar> load_image(const std::string& path) const {
    return preprocess_image<Scalar>(io::read_pnm(resolve_path(base_dir_, path)),
                                    image_cfg_);
  }

  ImageTensor<Scalar> preprocess(const io::Raster& raster) const {
    return preprocess_image<Scalar>(raster, image_cfg_);
  }

  AudioSegment<Scalar> load_audio(const std::string& path) const {
    io::WavData wav = io::read_wav(resolve_path(base_dir_, path));
    return preprocess_audio<Scalar>(wav.samples, wav.sample_rate, audio_cfg_);
  }

  const BatchSample<Scalar>& load(const SampleRecord& rec) {
    auto it = cache_.find(rec.id);
    if (it != cache_.end()) return it->second;
    BatchSample<Scalar> sample;
    sample.image = load_image(rec.image_path);
    sample.audio_features = backends_.audio->encode(load_audio(rec.audio_path));
    sample.spatial = backends_.image->encode(sample.image).second;
    return cache_.emplace(rec.id, std::move(sample)).first->second;
  }

  std::vector<BatchSample<Scalar>> load_all(const Dataset& dataset) {
    std::vector<BatchSample<Scalar>> out;
    out.reserve(dataset.records.size());
    for (const auto& rec : dataset.records) out.push_back(load(rec));
    return out;
  }

  const std::string& base_dir() const { return base_dir_; }

 private:
  const BackendSet<Scalar>& backends_;
  ImagePreprocessConfig image_cfg_;
  AudioPreprocessConfig audio_cfg_;
  std::string base_dir_;
  std::unordered_map<std::string, BatchSample<Scalar>> cache_;
};

}  // namespace avloc
