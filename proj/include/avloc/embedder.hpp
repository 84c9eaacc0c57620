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

#include <vector>

#include "avloc/autodiff.hpp"
#include "avloc/backends.hpp"
#include "avloc/rng.hpp"
#include "avloc/types.hpp"

// Audio-driven embedder: projects a pooled audio feature sequence into a
// single continuous token, splices it after the placeholder template, and
// encodes the result with the frozen token encoder. The projection network
// holds the only trainable parameters besides the image-masker scalars.
namespace avloc {

template <typename Scalar>
struct ProjectionParams {
  Mat<Scalar> w1;   // D_h x D_a
  Vec<Scalar> b1;   // D_h
  Mat<Scalar> w2;   // D_tok x D_h
  Vec<Scalar> b2;   // D_tok
  Vec<Scalar> attn; // D_h pooling scorer

  // Fan-in uniform weights; attn starts at zero so pooling begins as a mean.
  static ProjectionParams init(std::uint64_t seed, int audio_dim,
                               int hidden_dim, int token_dim) {
    ProjectionParams p;
    p.w1 = seeded_fan_in<Scalar>(stream_key({seed, 11}), hidden_dim, audio_dim);
    p.b1 = Vec<Scalar>::Zero(hidden_dim);
    p.w2 = seeded_fan_in<Scalar>(stream_key({seed, 12}), token_dim, hidden_dim);
    p.b2 = Vec<Scalar>::Zero(token_dim);
    p.attn = Vec<Scalar>::Zero(hidden_dim);
    return p;
  }
};

// Leaf (or constant) wrappers of the projection parameters, shared across a
// batch so gradients accumulate in one place.
template <typename Scalar>
struct ProjectionVars {
  ad::Var<Scalar> w1, b1, w2, b2, attn;

  static ProjectionVars leaves(const ProjectionParams<Scalar>& p) {
    return {ad::Var<Scalar>::leaf(p.w1), ad::Var<Scalar>::leaf(p.b1),
            ad::Var<Scalar>::leaf(p.w2), ad::Var<Scalar>::leaf(p.b2),
            ad::Var<Scalar>::leaf(p.attn)};
  }
  static ProjectionVars constants(const ProjectionParams<Scalar>& p) {
    return {ad::Var<Scalar>::constant(p.w1), ad::Var<Scalar>::constant(p.b1),
            ad::Var<Scalar>::constant(p.w2), ad::Var<Scalar>::constant(p.b2),
            ad::Var<Scalar>::constant(p.attn)};
  }
};

inline std::vector<int> placeholder_ids() {
  return {kTokenStart, kTokenA, kTokenPhoto, kTokenOf, kTokenA, kTokenEnd};
}

// Index of the continuous token within the composed sequence.
inline constexpr int kAudioTokenSlot = 5;

// h_t = W1 x_t + b1; alpha = softmax_t(attn . tanh(h_t));
// token = W2 tanh(sum_t alpha_t h_t) + b2.
template <typename Scalar>
ad::Var<Scalar> project_audio(const Mat<Scalar>& features,
                              const ProjectionVars<Scalar>& p) {
  if (features.rows() < 1)
    throw ValidationError("project_audio: empty feature sequence");
  auto x = ad::Var<Scalar>::constant(features.transpose());  // D_a x T
  auto hidden = ad::add_col_broadcast(ad::matmul(p.w1, x), p.b1);  // D_h x T
  auto scores = ad::matmul(ad::transpose(p.attn), ad::tanh_op(hidden));
  auto alpha = ad::softmax(ad::transpose(scores));             // T x 1
  auto pooled = ad::matmul(hidden, alpha);                     // D_h x 1
  return ad::add_col_broadcast(ad::matmul(p.w2, ad::tanh_op(pooled)), p.b2);
}

template <typename Scalar>
Vec<Scalar> project_audio(const Mat<Scalar>& features,
                          const ProjectionParams<Scalar>& params) {
  return project_audio(features, ProjectionVars<Scalar>::constants(params))
      .value();
}

// [start, "a", "photo", "of", "a", AUDIO, end]; length 7.
template <typename Scalar>
TokenSequence<Scalar> compose_tokens(const Vec<Scalar>& audio_token) {
  if (!audio_token.allFinite())
    throw ValidationError("compose_tokens: non-finite audio token");
  const auto ids = placeholder_ids();
  TokenSequence<Scalar> seq;
  for (int i = 0; i < kAudioTokenSlot; ++i)
    seq.entries.push_back({false, ids[static_cast<std::size_t>(i)], {}});
  seq.entries.push_back({true, -1, audio_token});
  seq.entries.push_back({false, ids.back(), {}});
  return seq;
}

// A = normalize(E_tokens(template + audio token)); unit norm by construction.
template <typename Scalar>
ad::Var<Scalar> embed_audio_features(const Mat<Scalar>& features,
                                     const ProjectionVars<Scalar>& p,
                                     const BackendSet<Scalar>& backends) {
  auto token = project_audio(features, p);
  auto context = backends.tokens->encode(placeholder_ids(), token);
  return ad::l2_normalize(context);
}

template <typename Scalar>
Vec<Scalar> embed_audio(const AudioSegment<Scalar>& audio,
                        const ProjectionParams<Scalar>& params,
                        const BackendSet<Scalar>& backends) {
  Mat<Scalar> features = backends.audio->encode(audio);
  return embed_audio_features(features,
                              ProjectionVars<Scalar>::constants(params),
                              backends)
      .value();
}

}  // namespace avloc
