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

#include <algorithm>
#include <cmath>
#include <vector>

#include "avloc/types.hpp"

namespace avloc {

// Fixed-length mono waveform, unit amplitude.
template <typename Scalar>
struct AudioSegment {
  Vec<Scalar> samples;
  int sample_rate = 16000;
  double duration = 10.0;

  Eigen::Index expected_length() const {
    return static_cast<Eigen::Index>(std::llround(sample_rate * duration));
  }
};

struct AudioPreprocessConfig {
  int sample_rate = 16000;
  double duration = 10.0;
};

// Linear-interpolation resampler. Identity when rates match.
inline std::vector<double> resample_linear(const std::vector<double>& in,
                                           int src_rate, int dst_rate) {
  if (src_rate == dst_rate) return in;
  const auto n_out = static_cast<std::size_t>(std::llround(
      static_cast<double>(in.size()) * dst_rate / src_rate));
  std::vector<double> out(std::max<std::size_t>(n_out, 1));
  const double step = static_cast<double>(src_rate) / dst_rate;
  for (std::size_t j = 0; j < out.size(); ++j) {
    double x = j * step;
    auto lo = static_cast<std::size_t>(x);
    if (lo >= in.size() - 1) {
      out[j] = in.back();
      continue;
    }
    const double w = x - static_cast<double>(lo);
    out[j] = (1.0 - w) * in[lo] + w * in[lo + 1];
  }
  return out;
}

// Resamples to the target rate, then tiles short input from the start (so no
// silent tail biases pooling) or center-crops long input, then clips to
// [-1, 1]. Idempotent on conformant input.
template <typename Scalar>
AudioSegment<Scalar> preprocess_audio(const std::vector<double>& raw,
                                      int src_rate,
                                      const AudioPreprocessConfig& cfg = {}) {
  if (raw.empty()) throw ValidationError("preprocess_audio: empty waveform");
  if (src_rate <= 0)
    throw ValidationError("preprocess_audio: bad source rate");

  std::vector<double> s = resample_linear(raw, src_rate, cfg.sample_rate);
  const auto target = static_cast<std::size_t>(
      std::llround(cfg.sample_rate * cfg.duration));

  AudioSegment<Scalar> seg;
  seg.sample_rate = cfg.sample_rate;
  seg.duration = cfg.duration;
  seg.samples.resize(static_cast<Eigen::Index>(target));

  if (s.size() >= target) {
    const std::size_t start = (s.size() - target) / 2;
    for (std::size_t i = 0; i < target; ++i)
      seg.samples(static_cast<Eigen::Index>(i)) =
          static_cast<Scalar>(std::clamp(s[start + i], -1.0, 1.0));
  } else {
    for (std::size_t i = 0; i < target; ++i)
      seg.samples(static_cast<Eigen::Index>(i)) =
          static_cast<Scalar>(std::clamp(s[i % s.size()], -1.0, 1.0));
  }
  return seg;
}

}  // namespace avloc
