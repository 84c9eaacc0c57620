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
#include <string>

#include <json.hpp>

#include "avloc/audio.hpp"
#include "avloc/backends.hpp"
#include "avloc/image.hpp"
#include "avloc/losses.hpp"
#include "avloc/masks.hpp"
#include "avloc/train.hpp"

namespace avloc {

// Raised for config problems; messages name the offending key path so the
// CLI can exit with code 2 and a usable diagnostic.
class ConfigError : public AvlocError {
 public:
  explicit ConfigError(const std::string& what) : AvlocError(what) {}
};

// Full run configuration. Every tunable default in the framework lives here;
// unknown keys in a config file are rejected.
struct RunConfig {
  struct Data {
    std::string train_manifest;  // used by the train command
    int input_size = 352;
    int sample_rate = 16000;
    double audio_seconds = 10.0;
    std::array<double, 3> image_mean = {0.48145466, 0.4578275, 0.40821073};
    std::array<double, 3> image_std = {0.26862954, 0.26130258, 0.27577711};
  } data;

  struct Backends {
    std::string kind = "toy";  // "toy" or "pretrained"
    std::uint64_t seed = 17;
    int patch_grid = 8;
    int spatial_dim = 16;
    int clip_dim = 16;
    int audio_dim = 16;
    int spectrogram_bins = 8;
    double hop_seconds = 0.5;
    double bin_hz = 50.0;
    int token_dim = 12;
    int vocab_size = 32;
    int context_length = 77;
    double ground_scale = 4.0;
    double lookup_scale = 0.05;
    std::string weights_dir;
  } backends;

  struct Masker {
    double init_w = 1.0;
    double init_b = 0.0;
    double gumbel_temp = 0.7;
    double soft_theta = 0.5;
    double soft_temp = 0.1;
  } masker;

  struct Loss {
    double tau = 0.07;
    double lambda_acl_i = 1.0;
    double lambda_acl_f = 1.0;
    double lambda_reg = 1.0;
    double p_pos = 0.4;
    double p_neg = 0.0;
  } loss;

  struct Train {
    int epochs = 20;
    int batch_size = 16;
    double learning_rate = 1e-3;
    double weight_decay = 1e-3;
    std::string weight_decay_mode = "coupled";  // or "decoupled"
    std::uint64_t seed = 0;
    int hidden_dim = 16;
    int checkpoint_every = 1;  // epochs between checkpoints
  } train;

  struct Inference {
    double threshold = 0.5;
    std::string rule = "paper";  // or "train_form"
  } inference;

  struct Output {
    bool per_sample_csv = false;
  } output;

  int jobs = 0;  // 0 = number of logical processors
};

// Parses defaults overlaid with the file; AVLOC_SEED overrides train.seed.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const nlohmann::json& j);

// Fully-resolved echo, written into every output directory.
nlohmann::ordered_json to_json(const RunConfig& cfg);

// Section adapters.
template <typename Scalar>
LossConfig<Scalar> loss_config(const RunConfig& cfg) {
  LossConfig<Scalar> out;
  out.tau = static_cast<Scalar>(cfg.loss.tau);
  out.lambda_acl_i = static_cast<Scalar>(cfg.loss.lambda_acl_i);
  out.lambda_acl_f = static_cast<Scalar>(cfg.loss.lambda_acl_f);
  out.lambda_reg = static_cast<Scalar>(cfg.loss.lambda_reg);
  out.p_pos = static_cast<Scalar>(cfg.loss.p_pos);
  out.p_neg = static_cast<Scalar>(cfg.loss.p_neg);
  return out;
}

template <typename Scalar>
MaskerParams<Scalar> masker_params(const RunConfig& cfg) {
  MaskerParams<Scalar> out;
  out.w = static_cast<Scalar>(cfg.masker.init_w);
  out.b = static_cast<Scalar>(cfg.masker.init_b);
  out.gumbel_temp = static_cast<Scalar>(cfg.masker.gumbel_temp);
  out.soft_theta = static_cast<Scalar>(cfg.masker.soft_theta);
  out.soft_temp = static_cast<Scalar>(cfg.masker.soft_temp);
  return out;
}

template <typename Scalar>
TrainConfig<Scalar> train_config(const RunConfig& cfg) {
  TrainConfig<Scalar> out;
  out.epochs = cfg.train.epochs;
  out.batch_size = cfg.train.batch_size;
  out.learning_rate = static_cast<Scalar>(cfg.train.learning_rate);
  out.weight_decay = static_cast<Scalar>(cfg.train.weight_decay);
  out.weight_decay_mode = cfg.train.weight_decay_mode == "decoupled"
                              ? WeightDecayMode::kDecoupled
                              : WeightDecayMode::kCoupled;
  out.seed = cfg.train.seed;
  out.hidden_dim = cfg.train.hidden_dim;
  out.loss = loss_config<Scalar>(cfg);
  return out;
}

inline ToyBackendConfig toy_backend_config(const RunConfig& cfg) {
  ToyBackendConfig out;
  out.seed = cfg.backends.seed;
  out.input_size = cfg.data.input_size;
  out.patch_grid = cfg.backends.patch_grid;
  out.spatial_dim = cfg.backends.spatial_dim;
  out.clip_dim = cfg.backends.clip_dim;
  out.audio_dim = cfg.backends.audio_dim;
  out.spectrogram_bins = cfg.backends.spectrogram_bins;
  out.hop_seconds = cfg.backends.hop_seconds;
  out.bin_hz = cfg.backends.bin_hz;
  out.token_dim = cfg.backends.token_dim;
  out.vocab_size = cfg.backends.vocab_size;
  out.context_length = cfg.backends.context_length;
  out.ground_scale = cfg.backends.ground_scale;
  out.lookup_scale = cfg.backends.lookup_scale;
  return out;
}

inline ImagePreprocessConfig image_preprocess_config(const RunConfig& cfg) {
  ImagePreprocessConfig out;
  out.size = cfg.data.input_size;
  out.mean = cfg.data.image_mean;
  out.std = cfg.data.image_std;
  return out;
}

inline AudioPreprocessConfig audio_preprocess_config(const RunConfig& cfg) {
  AudioPreprocessConfig out;
  out.sample_rate = cfg.data.sample_rate;
  out.duration = cfg.data.audio_seconds;
  return out;
}

inline InferenceRule inference_rule(const RunConfig& cfg) {
  return cfg.inference.rule == "train_form" ? InferenceRule::kTrainForm
                                            : InferenceRule::kPaper;
}

template <typename Scalar>
BackendSet<Scalar> make_backends(const RunConfig& cfg) {
  if (cfg.backends.kind == "toy")
    return make_toy_backends<Scalar>(toy_backend_config(cfg));
  return make_pretrained_backends<Scalar>(cfg.backends.weights_dir);
}

}  // namespace avloc
