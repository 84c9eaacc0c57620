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

#include <cstdint>
#include <string>
#include <vector>

namespace avloc::io {

struct WavData {
  std::vector<double> samples;  // mono, in [-1, 1]
  int sample_rate = 0;
};

// Reads a RIFF/WAVE file. PCM16 and IEEE float32 are supported; multichannel
// input is averaged down to mono.
WavData read_wav(const std::string& path);

// Writes mono PCM16.
void write_wav(const std::string& path, const std::vector<double>& samples,
               int sample_rate);

}  // namespace avloc::io
