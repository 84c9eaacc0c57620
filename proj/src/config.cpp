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

#include "avloc/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace avloc {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& section) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key))
      throw ConfigError("unknown config key: " +
                        (section.empty() ? key : section + "." + key));
  }
}

template <typename T>
void get_to(const json& obj, const char* key, const std::string& section,
            T& out) {
  if (!obj.contains(key)) return;
  try {
    obj.at(key).get_to(out);
  } catch (const json::exception&) {
    throw ConfigError("bad value for config key: " + section + "." + key);
  }
}

void require(bool ok, const std::string& key_path, const std::string& why) {
  if (!ok) throw ConfigError("invalid config value: " + key_path + " " + why);
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  check_keys(j, {"data", "backends", "masker", "loss", "train", "inference",
                 "output", "jobs"},
             "");

  if (j.contains("data")) {
    const auto& s = j.at("data");
    check_keys(s, {"train_manifest", "input_size", "sample_rate",
                   "audio_seconds", "image_mean", "image_std"},
               "data");
    get_to(s, "train_manifest", "data", cfg.data.train_manifest);
    get_to(s, "input_size", "data", cfg.data.input_size);
    get_to(s, "sample_rate", "data", cfg.data.sample_rate);
    get_to(s, "audio_seconds", "data", cfg.data.audio_seconds);
    get_to(s, "image_mean", "data", cfg.data.image_mean);
    get_to(s, "image_std", "data", cfg.data.image_std);
  }
  if (j.contains("backends")) {
    const auto& s = j.at("backends");
    check_keys(s, {"kind", "seed", "patch_grid", "spatial_dim", "clip_dim",
                   "audio_dim", "spectrogram_bins", "hop_seconds", "bin_hz",
                   "token_dim", "vocab_size", "context_length", "ground_scale",
                   "lookup_scale", "weights_dir"},
               "backends");
    get_to(s, "kind", "backends", cfg.backends.kind);
    get_to(s, "seed", "backends", cfg.backends.seed);
    get_to(s, "patch_grid", "backends", cfg.backends.patch_grid);
    get_to(s, "spatial_dim", "backends", cfg.backends.spatial_dim);
    get_to(s, "clip_dim", "backends", cfg.backends.clip_dim);
    get_to(s, "audio_dim", "backends", cfg.backends.audio_dim);
    get_to(s, "spectrogram_bins", "backends", cfg.backends.spectrogram_bins);
    get_to(s, "hop_seconds", "backends", cfg.backends.hop_seconds);
    get_to(s, "bin_hz", "backends", cfg.backends.bin_hz);
    get_to(s, "token_dim", "backends", cfg.backends.token_dim);
    get_to(s, "vocab_size", "backends", cfg.backends.vocab_size);
    get_to(s, "context_length", "backends", cfg.backends.context_length);
    get_to(s, "ground_scale", "backends", cfg.backends.ground_scale);
    get_to(s, "lookup_scale", "backends", cfg.backends.lookup_scale);
    get_to(s, "weights_dir", "backends", cfg.backends.weights_dir);
  }
  if (j.contains("masker")) {
    const auto& s = j.at("masker");
    check_keys(s, {"init_w", "init_b", "gumbel_temp", "soft_theta",
                   "soft_temp"},
               "masker");
    get_to(s, "init_w", "masker", cfg.masker.init_w);
    get_to(s, "init_b", "masker", cfg.masker.init_b);
    get_to(s, "gumbel_temp", "masker", cfg.masker.gumbel_temp);
    get_to(s, "soft_theta", "masker", cfg.masker.soft_theta);
    get_to(s, "soft_temp", "masker", cfg.masker.soft_temp);
  }
  if (j.contains("loss")) {
    const auto& s = j.at("loss");
    check_keys(s, {"tau", "lambda_acl_i", "lambda_acl_f", "lambda_reg",
                   "p_pos", "p_neg"},
               "loss");
    get_to(s, "tau", "loss", cfg.loss.tau);
    get_to(s, "lambda_acl_i", "loss", cfg.loss.lambda_acl_i);
    get_to(s, "lambda_acl_f", "loss", cfg.loss.lambda_acl_f);
    get_to(s, "lambda_reg", "loss", cfg.loss.lambda_reg);
    get_to(s, "p_pos", "loss", cfg.loss.p_pos);
    get_to(s, "p_neg", "loss", cfg.loss.p_neg);
  }
  if (j.contains("train")) {
    const auto& s = j.at("train");
    check_keys(s, {"epochs", "batch_size", "learning_rate", "weight_decay",
                   "weight_decay_mode", "seed", "hidden_dim",
                   "checkpoint_every"},
               "train");
    get_to(s, "epochs", "train", cfg.train.epochs);
    get_to(s, "batch_size", "train", cfg.train.batch_size);
    get_to(s, "learning_rate", "train", cfg.train.learning_rate);
    get_to(s, "weight_decay", "train", cfg.train.weight_decay);
    get_to(s, "weight_decay_mode", "train", cfg.train.weight_decay_mode);
    get_to(s, "seed", "train", cfg.train.seed);
    get_to(s, "hidden_dim", "train", cfg.train.hidden_dim);
    get_to(s, "checkpoint_every", "train", cfg.train.checkpoint_every);
  }
  if (j.contains("inference")) {
    const auto& s = j.at("inference");
    check_keys(s, {"threshold", "rule"}, "inference");
    get_to(s, "threshold", "inference", cfg.inference.threshold);
    get_to(s, "rule", "inference", cfg.inference.rule);
  }
  if (j.contains("output")) {
    const auto& s = j.at("output");
    check_keys(s, {"per_sample_csv"}, "output");
    get_to(s, "per_sample_csv", "output", cfg.output.per_sample_csv);
  }
  get_to(j, "jobs", "", cfg.jobs);

  if (const char* env_seed = std::getenv("AVLOC_SEED")) {
    try {
      cfg.train.seed = std::stoull(env_seed);
    } catch (...) {
      throw ConfigError("invalid AVLOC_SEED environment value");
    }
  }

  require(cfg.data.input_size >= 1, "data.input_size", "must be >= 1");
  require(cfg.data.sample_rate >= 1, "data.sample_rate", "must be >= 1");
  require(cfg.data.audio_seconds > 0, "data.audio_seconds", "must be > 0");
  require(cfg.backends.kind == "toy" || cfg.backends.kind == "pretrained",
          "backends.kind", "must be \"toy\" or \"pretrained\"");
  require(cfg.backends.patch_grid >= 1, "backends.patch_grid", "must be >= 1");
  require(cfg.backends.hop_seconds > 0, "backends.hop_seconds", "must be > 0");
  require(cfg.masker.gumbel_temp > 0, "masker.gumbel_temp", "must be > 0");
  require(cfg.masker.soft_temp > 0, "masker.soft_temp", "must be > 0");
  require(cfg.loss.tau > 0, "loss.tau", "must be > 0");
  require(cfg.loss.lambda_acl_i >= 0, "loss.lambda_acl_i", "must be >= 0");
  require(cfg.loss.lambda_acl_f >= 0, "loss.lambda_acl_f", "must be >= 0");
  require(cfg.loss.lambda_reg >= 0, "loss.lambda_reg", "must be >= 0");
  require(cfg.loss.p_pos >= 0 && cfg.loss.p_pos <= 1, "loss.p_pos",
          "must be in [0, 1]");
  require(cfg.loss.p_neg >= 0 && cfg.loss.p_neg <= 1, "loss.p_neg",
          "must be in [0, 1]");
  require(cfg.train.epochs >= 1, "train.epochs", "must be >= 1");
  require(cfg.train.batch_size >= 1, "train.batch_size", "must be >= 1");
  require(cfg.train.learning_rate > 0, "train.learning_rate", "must be > 0");
  require(cfg.train.weight_decay >= 0, "train.weight_decay", "must be >= 0");
  require(cfg.train.weight_decay_mode == "coupled" ||
              cfg.train.weight_decay_mode == "decoupled",
          "train.weight_decay_mode", "must be \"coupled\" or \"decoupled\"");
  require(cfg.train.hidden_dim >= 1, "train.hidden_dim", "must be >= 1");
  require(cfg.train.checkpoint_every >= 1, "train.checkpoint_every",
          "must be >= 1");
  require(cfg.inference.rule == "paper" || cfg.inference.rule == "train_form",
          "inference.rule", "must be \"paper\" or \"train_form\"");
  require(cfg.jobs >= 0, "jobs", "must be >= 0");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("invalid config JSON in " + path + ": " + e.what());
  }
  return parse_run_config(j);
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["data"] = {{"train_manifest", cfg.data.train_manifest},
               {"input_size", cfg.data.input_size},
               {"sample_rate", cfg.data.sample_rate},
               {"audio_seconds", cfg.data.audio_seconds},
               {"image_mean", cfg.data.image_mean},
               {"image_std", cfg.data.image_std}};
  j["backends"] = {{"kind", cfg.backends.kind},
                   {"seed", cfg.backends.seed},
                   {"patch_grid", cfg.backends.patch_grid},
                   {"spatial_dim", cfg.backends.spatial_dim},
                   {"clip_dim", cfg.backends.clip_dim},
                   {"audio_dim", cfg.backends.audio_dim},
                   {"spectrogram_bins", cfg.backends.spectrogram_bins},
                   {"hop_seconds", cfg.backends.hop_seconds},
                   {"bin_hz", cfg.backends.bin_hz},
                   {"token_dim", cfg.backends.token_dim},
                   {"vocab_size", cfg.backends.vocab_size},
                   {"context_length", cfg.backends.context_length},
                   {"ground_scale", cfg.backends.ground_scale},
                   {"lookup_scale", cfg.backends.lookup_scale},
                   {"weights_dir", cfg.backends.weights_dir}};
  j["masker"] = {{"init_w", cfg.masker.init_w},
                 {"init_b", cfg.masker.init_b},
                 {"gumbel_temp", cfg.masker.gumbel_temp},
                 {"soft_theta", cfg.masker.soft_theta},
                 {"soft_temp", cfg.masker.soft_temp}};
  j["loss"] = {{"tau", cfg.loss.tau},
               {"lambda_acl_i", cfg.loss.lambda_acl_i},
               {"lambda_acl_f", cfg.loss.lambda_acl_f},
               {"lambda_reg", cfg.loss.lambda_reg},
               {"p_pos", cfg.loss.p_pos},
               {"p_neg", cfg.loss.p_neg}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"learning_rate", cfg.train.learning_rate},
                {"weight_decay", cfg.train.weight_decay},
                {"weight_decay_mode", cfg.train.weight_decay_mode},
                {"seed", cfg.train.seed},
                {"hidden_dim", cfg.train.hidden_dim},
                {"checkpoint_every", cfg.train.checkpoint_every}};
  j["inference"] = {{"threshold", cfg.inference.threshold},
                    {"rule", cfg.inference.rule}};
  j["output"] = {{"per_sample_csv", cfg.output.per_sample_csv}};
  j["jobs"] = cfg.jobs;
  return j;
}

}  // namespace avloc
