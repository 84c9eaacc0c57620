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
#include <memory>
#include <utility>
#include <vector>

#include "avloc/audio.hpp"
#include "avloc/autodiff.hpp"
#include "avloc/image.hpp"
#include "avloc/rng.hpp"
#include "avloc/types.hpp"

// The four frozen backbones behind interface contracts, plus deterministic
// seeded linear toy backends. Backends are immutable after construction;
// every call is read-only.
namespace avloc {

template <typename Scalar>
struct SpatialFeatures {
  Mat<Scalar> features;  // c x (h*w), cell index q = r*w + s
  int h = 0;
  int w = 0;
};

template <typename Scalar>
struct TokenEntry {
  bool is_continuous = false;
  int id = -1;              // valid when !is_continuous
  Vec<Scalar> vector;       // valid when is_continuous
};

template <typename Scalar>
struct TokenSequence {
  std::vector<TokenEntry<Scalar>> entries;
};

template <typename Scalar>
class ImageEncoder {
 public:
  virtual ~ImageEncoder() = default;
  virtual int input_size() const = 0;
  virtual int grid() const = 0;      // spatial grid side
  virtual int clip_dim() const = 0;
  // Global embedding + spatial features of a conforming image.
  virtual std::pair<Vec<Scalar>, SpatialFeatures<Scalar>> encode(
      const ImageTensor<Scalar>& image) const = 0;
  // Graph path for the masked re-encode: pixels is a 3 x (h*w) Var.
  virtual ad::Var<Scalar> encode_global(const ad::Var<Scalar>& pixels) const = 0;
  virtual std::uint64_t weights_hash() const = 0;
};

template <typename Scalar>
class AudioEncoder {
 public:
  virtual ~AudioEncoder() = default;
  virtual int feature_dim() const = 0;
  // T x D_a feature sequence.
  virtual Mat<Scalar> encode(const AudioSegment<Scalar>& audio) const = 0;
  virtual std::uint64_t weights_hash() const = 0;
};

template <typename Scalar>
class TokenEncoder {
 public:
  virtual ~TokenEncoder() = default;
  virtual int token_dim() const = 0;
  virtual int clip_dim() const = 0;
  virtual int context_length() const = 0;
  virtual Vec<Scalar> encode(const TokenSequence<Scalar>& tokens) const = 0;
  // Graph path: discrete ids plus the single continuous token as a Var, so
  // gradients reach the token while the encoder weights stay frozen.
  virtual ad::Var<Scalar> encode(const std::vector<int>& ids,
                                 const ad::Var<Scalar>& continuous) const = 0;
  virtual std::uint64_t weights_hash() const = 0;
};

template <typename Scalar>
class Grounder {
 public:
  virtual ~Grounder() = default;
  // Logit map of candidate sounding regions, at the feature grid resolution.
  virtual Mat<Scalar> ground(const SpatialFeatures<Scalar>& visual,
                             const Vec<Scalar>& condition) const = 0;
  virtual ad::Var<Scalar> ground(const SpatialFeatures<Scalar>& visual,
                                 const ad::Var<Scalar>& condition) const = 0;
  virtual std::uint64_t weights_hash() const = 0;
};

// ---------------------------------------------------------------------------
// Toy backends: seeded affine maps with closed-form oracles.
// ---------------------------------------------------------------------------

struct ToyBackendConfig {
  std::uint64_t seed = 17;
  int input_size = 352;
  int patch_grid = 8;        // g: spatial grid side of the toy image encoder
  int spatial_dim = 16;      // c
  int clip_dim = 16;         // D_clip; toy grounder requires clip_dim == spatial_dim
  int audio_dim = 16;        // D_a
  int spectrogram_bins = 8;
  double hop_seconds = 0.5;
  double bin_hz = 50.0;      // tone frequency spacing of the toy spectrogram
  int token_dim = 12;        // D_tok
  int vocab_size = 32;
  int context_length = 77;
  double ground_scale = 4.0;
  double lookup_scale = 0.05;
};

// Placeholder template token ids ("a photo of a").
inline constexpr int kTokenStart = 1;
inline constexpr int kTokenA = 2;
inline constexpr int kTokenPhoto = 3;
inline constexpr int kTokenOf = 4;
inline constexpr int kTokenEnd = 5;

template <typename Scalar>
class ToyImageEncoder final : public ImageEncoder<Scalar> {
 public:
  explicit ToyImageEncoder(const ToyBackendConfig& cfg)
      : cfg_(cfg),
        spatial_proj_(seeded_fan_in<Scalar>(stream_key({cfg.seed, 1}),
                                            cfg.spatial_dim, 3)),
        global_proj_(seeded_fan_in<Scalar>(stream_key({cfg.seed, 2}),
                                           cfg.clip_dim, 3)) {}

  int input_size() const override { return cfg_.input_size; }
  int grid() const override { return cfg_.patch_grid; }
  int clip_dim() const override { return cfg_.clip_dim; }

  std::pair<Vec<Scalar>, SpatialFeatures<Scalar>> encode(
      const ImageTensor<Scalar>& image) const override {
    if (image.height != cfg_.input_size || image.width != cfg_.input_size)
      throw ValidationError("ToyImageEncoder: wrong input size");
    const int g = cfg_.patch_grid;
    SpatialFeatures<Scalar> sp;
    sp.h = sp.w = g;
    sp.features = spatial_proj_ * patch_means(image);
    Vec<Scalar> global = global_proj_ * image.pixels.rowwise().mean();
    return {std::move(global), std::move(sp)};
  }

  ad::Var<Scalar> encode_global(const ad::Var<Scalar>& pixels) const override {
    return ad::matmul(ad::Var<Scalar>::constant(global_proj_),
                      ad::row_mean(pixels));
  }

  std::uint64_t weights_hash() const override {
    return hash_matrix(global_proj_, hash_matrix(spatial_proj_));
  }

  // Per-patch channel means, 3 x (g*g); exposed for oracle tests.
  Mat<Scalar> patch_means(const ImageTensor<Scalar>& image) const {
    const int g = cfg_.patch_grid;
    const int h = image.height, w = image.width;
    Mat<Scalar> means = Mat<Scalar>::Zero(3, static_cast<Eigen::Index>(g) * g);
    Mat<Scalar> counts = Mat<Scalar>::Zero(1, static_cast<Eigen::Index>(g) * g);
    for (int y = 0; y < h; ++y) {
      const int r = std::min(y * g / h, g - 1);
      for (int x = 0; x < w; ++x) {
        const int s = std::min(x * g / w, g - 1);
        const Eigen::Index q = static_cast<Eigen::Index>(r) * g + s;
        means.col(q) += image.pixels.col(static_cast<Eigen::Index>(y) * w + x);
        counts(0, q) += Scalar(1);
      }
    }
    for (Eigen::Index q = 0; q < means.cols(); ++q) means.col(q) /= counts(0, q);
    return means;
  }

 private:
  ToyBackendConfig cfg_;
  Mat<Scalar> spatial_proj_;  // c x 3
  Mat<Scalar> global_proj_;   // D_clip x 3
};

template <typename Scalar>
class ToyAudioEncoder final : public AudioEncoder<Scalar> {
 public:
  explicit ToyAudioEncoder(const ToyBackendConfig& cfg)
      : cfg_(cfg),
        proj_(seeded_fan_in<Scalar>(stream_key({cfg.seed, 3}), cfg.audio_dim,
                                    cfg.spectrogram_bins)) {}

  int feature_dim() const override { return cfg_.audio_dim; }

  // Frequency of spectrogram bin j; a unit tone there yields a one-hot
  // normalized frame spectrum, so features become column j of the projection.
  double bin_frequency(int j) const { return (j + 1) * cfg_.bin_hz; }

  Mat<Scalar> encode(const AudioSegment<Scalar>& audio) const override {
    if (audio.samples.size() != audio.expected_length())
      throw ValidationError("ToyAudioEncoder: audio not preprocessed");
    Mat<Scalar> spec = spectrogram(audio);
    Mat<Scalar> feats(spec.rows(), cfg_.audio_dim);
    for (Eigen::Index t = 0; t < spec.rows(); ++t)
      feats.row(t) = (proj_ * spec.row(t).transpose()).transpose();
    return feats;
  }

  // T x n_bins magnitude spectrogram: non-overlapping rectangular frames,
  // DFT magnitudes at integer bin frequencies, scaled by 2/N so a unit tone
  // at a bin frequency measures 1.0.
  Mat<Scalar> spectrogram(const AudioSegment<Scalar>& audio) const {
    const auto frame =
        static_cast<Eigen::Index>(std::llround(cfg_.hop_seconds *
                                               audio.sample_rate));
    const Eigen::Index frames = audio.samples.size() / frame;
    Mat<Scalar> spec(frames, cfg_.spectrogram_bins);
    for (Eigen::Index t = 0; t < frames; ++t) {
      for (int j = 0; j < cfg_.spectrogram_bins; ++j) {
        const double cycles = bin_frequency(j) * cfg_.hop_seconds;
        const double theta = 2.0 * M_PI * cycles / static_cast<double>(frame);
        const double dc = std::cos(theta), ds = std::sin(theta);
        double pc = 1.0, ps = 0.0;  // running phasor
        double re = 0.0, im = 0.0;
        for (Eigen::Index n = 0; n < frame; ++n) {
          const double v = static_cast<double>(audio.samples(t * frame + n));
          re += v * pc;
          im -= v * ps;
          const double npc = pc * dc - ps * ds;
          ps = pc * ds + ps * dc;
          pc = npc;
        }
        spec(t, j) = static_cast<Scalar>(2.0 * std::hypot(re, im) /
                                         static_cast<double>(frame));
      }
    }
    return spec;
  }

  const Mat<Scalar>& projection() const { return proj_; }

  std::uint64_t weights_hash() const override { return hash_matrix(proj_); }

 private:
  ToyBackendConfig cfg_;
  Mat<Scalar> proj_;  // D_a x n_bins
};

template <typename Scalar>
class ToyTokenEncoder final : public TokenEncoder<Scalar> {
 public:
  explicit ToyTokenEncoder(const ToyBackendConfig& cfg)
      : cfg_(cfg),
        lookup_(seeded_uniform<Scalar>(stream_key({cfg.seed, 4}), cfg.clip_dim,
                                       cfg.vocab_size, -cfg.lookup_scale,
                                       cfg.lookup_scale)),
        token_proj_(seeded_fan_in<Scalar>(stream_key({cfg.seed, 5}),
                                          cfg.clip_dim, cfg.token_dim)) {}

  int token_dim() const override { return cfg_.token_dim; }
  int clip_dim() const override { return cfg_.clip_dim; }
  int context_length() const override { return cfg_.context_length; }

  Vec<Scalar> encode(const TokenSequence<Scalar>& tokens) const override {
    if (static_cast<int>(tokens.entries.size()) > cfg_.context_length)
      throw ValidationError("ToyTokenEncoder: sequence exceeds context length");
    Vec<Scalar> out = Vec<Scalar>::Zero(cfg_.clip_dim);
    for (const auto& e : tokens.entries) {
      if (e.is_continuous) {
        if (e.vector.size() != cfg_.token_dim)
          throw ValidationError("ToyTokenEncoder: continuous token dim");
        out += token_proj_ * e.vector;
      } else {
        out += lookup_.col(check_id(e.id));
      }
    }
    return out;
  }

  ad::Var<Scalar> encode(const std::vector<int>& ids,
                         const ad::Var<Scalar>& continuous) const override {
    if (static_cast<int>(ids.size()) + 1 > cfg_.context_length)
      throw ValidationError("ToyTokenEncoder: sequence exceeds context length");
    Vec<Scalar> base = Vec<Scalar>::Zero(cfg_.clip_dim);
    for (int id : ids) base += lookup_.col(check_id(id));
    return ad::Var<Scalar>::constant(base) +
           ad::matmul(ad::Var<Scalar>::constant(token_proj_), continuous);
  }

  // Placeholder-only embedding P for the default template; oracle helper.
  Vec<Scalar> placeholder_embedding(const std::vector<int>& ids) const {
    Vec<Scalar> base = Vec<Scalar>::Zero(cfg_.clip_dim);
    for (int id : ids) base += lookup_.col(check_id(id));
    return base;
  }

  const Mat<Scalar>& token_projection() const { return token_proj_; }
  const Mat<Scalar>& lookup() const { return lookup_; }

  std::uint64_t weights_hash() const override {
    return hash_matrix(token_proj_, hash_matrix(lookup_));
  }

 private:
  int check_id(int id) const {
    if (id < 0 || id >= cfg_.vocab_size)
      throw ValidationError("ToyTokenEncoder: token id out of range");
    return id;
  }

  ToyBackendConfig cfg_;
  Mat<Scalar> lookup_;      // D_clip x vocab
  Mat<Scalar> token_proj_;  // D_clip x D_tok
};

// logits(r, s) = scale * <condition, feature cell (r, s)>.
template <typename Scalar>
class ToyGrounder final : public Grounder<Scalar> {
 public:
  explicit ToyGrounder(const ToyBackendConfig& cfg) : cfg_(cfg) {
    if (cfg.clip_dim != cfg.spatial_dim)
      throw ValidationError("ToyGrounder: clip_dim must equal spatial_dim");
  }

  Mat<Scalar> ground(const SpatialFeatures<Scalar>& visual,
                     const Vec<Scalar>& condition) const override {
    check(visual, condition.size());
    Vec<Scalar> flat = visual.features.transpose() * condition *
                       static_cast<Scalar>(cfg_.ground_scale);
    Mat<Scalar> row = flat.transpose();
    return unflatten_rowmajor(row, visual.h, visual.w);
  }

  ad::Var<Scalar> ground(const SpatialFeatures<Scalar>& visual,
                         const ad::Var<Scalar>& condition) const override {
    check(visual, condition.value().rows());
    auto flat = ad::scale(
        ad::matmul(ad::Var<Scalar>::constant(visual.features.transpose()),
                   condition),
        static_cast<Scalar>(cfg_.ground_scale));
    return ad::unflatten_rm(flat, visual.h, visual.w);
  }

  std::uint64_t weights_hash() const override {
    const double s = cfg_.ground_scale;
    return fnv1a64(&s, sizeof(s));
  }

 private:
  void check(const SpatialFeatures<Scalar>& visual, Eigen::Index dim) const {
    if (dim != visual.features.rows())
      throw ValidationError("ToyGrounder: condition dim mismatch");
    if (visual.h < 1 || visual.w < 1)
      throw ValidationError("ToyGrounder: empty feature grid");
  }

  ToyBackendConfig cfg_;
};

template <typename Scalar>
struct BackendSet {
  std::shared_ptr<ImageEncoder<Scalar>> image;
  std::shared_ptr<AudioEncoder<Scalar>> audio;
  std::shared_ptr<TokenEncoder<Scalar>> tokens;
  std::shared_ptr<Grounder<Scalar>> grounder;

  std::uint64_t weights_hash() const {
    std::uint64_t h = image->weights_hash();
    h = fnv1a64(&h, sizeof(h), audio->weights_hash());
    h = fnv1a64(&h, sizeof(h), tokens->weights_hash());
    std::uint64_t g = grounder->weights_hash();
    return fnv1a64(&g, sizeof(g), h);
  }
};

template <typename Scalar>
BackendSet<Scalar> make_toy_backends(const ToyBackendConfig& cfg) {
  BackendSet<Scalar> set;
  set.image = std::make_shared<ToyImageEncoder<Scalar>>(cfg);
  set.audio = std::make_shared<ToyAudioEncoder<Scalar>>(cfg);
  set.tokens = std::make_shared<ToyTokenEncoder<Scalar>>(cfg);
  set.grounder = std::make_shared<ToyGrounder<Scalar>>(cfg);
  return set;
}

// Pretrained adapters (CLIP image/token encoders, a BEATs-style audio
// encoder, a CLIPSeg-style grounder) plug in behind the same interfaces but
// are not bundled with this repository. Selecting them without an adapter
// implementation reports the gap instead of silently degrading.
template <typename Scalar>
BackendSet<Scalar> make_pretrained_backends(const std::string& weights_dir) {
  throw AvlocError(
      "pretrained backends are not bundled; no adapter is available for "
      "weights_dir=\"" + weights_dir +
      "\" (see README, section \"Pretrained backends\")");
}

}  // namespace avloc
