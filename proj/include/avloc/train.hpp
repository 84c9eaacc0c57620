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
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "avloc/losses.hpp"
#include "avloc/manifest.hpp"
#include "avloc/rng.hpp"

// Optimization loop: assemble seeded batches, evaluate the combined
// objective, and apply adaptive-moment updates to the projection network and
// the two masker scalars. Everything else stays frozen, which the loop
// verifies by hashing backend weights.
namespace avloc {

enum class WeightDecayMode { kCoupled, kDecoupled };

template <typename Scalar>
struct TrainConfig {
  int epochs = 20;
  int batch_size = 16;
  Scalar learning_rate = Scalar(1e-3);
  Scalar weight_decay = Scalar(1e-3);
  WeightDecayMode weight_decay_mode = WeightDecayMode::kCoupled;
  std::uint64_t seed = 0;
  int hidden_dim = 16;
  LossConfig<Scalar> loss;
};

// Everything the optimizer mutates, and nothing else.
template <typename Scalar>
struct TrainState {
  ProjectionParams<Scalar> proj;
  MaskerParams<Scalar> masker;
  std::vector<Mat<Scalar>> adam_m, adam_v;  // one slot per trainable tensor
  std::int64_t adam_t = 0;
  int epochs_done = 0;

  static TrainState init(const TrainConfig<Scalar>& cfg,
                         const MaskerParams<Scalar>& masker_init,
                         int audio_dim, int token_dim) {
    TrainState s;
    s.proj = ProjectionParams<Scalar>::init(cfg.seed, audio_dim,
                                            cfg.hidden_dim, token_dim);
    s.masker = masker_init;
    return s;
  }
};

// Fixed order of the trainable tensors (checkpoint layout depends on it).
inline const std::vector<std::string>& trainable_tensor_names() {
  static const std::vector<std::string> names = {
      "proj.w1", "proj.b1", "proj.w2", "proj.b2", "proj.attn",
      "masker.w", "masker.b"};
  return names;
}

namespace detail {

template <typename Scalar>
std::vector<Mat<Scalar>> gather_trainables(const TrainState<Scalar>& s) {
  return {s.proj.w1,
          s.proj.b1,
          s.proj.w2,
          s.proj.b2,
          s.proj.attn,
          Mat<Scalar>::Constant(1, 1, s.masker.w),
          Mat<Scalar>::Constant(1, 1, s.masker.b)};
}

template <typename Scalar>
void scatter_trainables(const std::vector<Mat<Scalar>>& t,
                        TrainState<Scalar>& s) {
  s.proj.w1 = t[0];
  s.proj.b1 = t[1];
  s.proj.w2 = t[2];
  s.proj.b2 = t[3];
  s.proj.attn = t[4];
  s.masker.w = t[5](0, 0);
  s.masker.b = t[6](0, 0);
}

}  // namespace detail

struct StepRecord {
  int epoch = 0;
  std::int64_t step = 0;  // global step index
  double loss = 0;
  double acl_i = 0;
  double acl_f = 0;
  double reg = 0;
  double mask_area_pos_mean = 0;
};

// One Adam update (beta1 0.9, beta2 0.999, eps 1e-8) over the given
// gradients, with coupled or decoupled weight decay.
template <typename Scalar>
void adam_update(TrainState<Scalar>& state,
                 const std::vector<Mat<Scalar>>& grads,
                 const TrainConfig<Scalar>& cfg) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::vector<Mat<Scalar>> params = detail::gather_trainables(state);
  if (state.adam_m.empty()) {
    for (const auto& p : params) {
      state.adam_m.push_back(Mat<Scalar>::Zero(p.rows(), p.cols()));
      state.adam_v.push_back(Mat<Scalar>::Zero(p.rows(), p.cols()));
    }
  }
  state.adam_t += 1;
  const Scalar c1 =
      Scalar(1.0 / (1.0 - std::pow(kBeta1, static_cast<double>(state.adam_t))));
  const Scalar c2 =
      Scalar(1.0 / (1.0 - std::pow(kBeta2, static_cast<double>(state.adam_t))));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Mat<Scalar> g = grads[k];
    if (cfg.weight_decay_mode == WeightDecayMode::kCoupled)
      g += cfg.weight_decay * params[k];
    auto& m = state.adam_m[k];
    auto& v = state.adam_v[k];
    m = Scalar(kBeta1) * m + Scalar(1.0 - kBeta1) * g;
    v = (Scalar(kBeta2) * v.array() +
         Scalar(1.0 - kBeta2) * g.array().square())
            .matrix();
    Mat<Scalar> update =
        ((m.array() * c1) /
         ((v.array() * c2).sqrt() + Scalar(kEps)))
            .matrix() *
        cfg.learning_rate;
    if (cfg.weight_decay_mode == WeightDecayMode::kDecoupled)
      update += (cfg.learning_rate * cfg.weight_decay) * params[k];
    params[k] -= update;
  }
  detail::scatter_trainables(params, state);
}

// Forward, backward, and one optimizer step on a batch. Pure given
// (state, batch, step_key): the Gumbel stream is keyed by
// (seed, epoch, step-in-epoch), so a step can be replayed exactly.
template <typename Scalar>
StepRecord train_step(TrainState<Scalar>& state,
                      const std::vector<BatchSample<Scalar>>& batch,
                      const BackendSet<Scalar>& backends,
                      const TrainConfig<Scalar>& cfg, int epoch,
                      std::int64_t step_in_epoch, std::int64_t global_step) {
  const std::uint64_t noise_key =
      stream_key({cfg.seed, static_cast<std::uint64_t>(epoch),
                  static_cast<std::uint64_t>(step_in_epoch)});

  for (const auto& t : detail::gather_trainables(state))
    if (!t.allFinite())
      throw AvlocError("non-finite parameters entering epoch " +
                       std::to_string(epoch) + " step " +
                       std::to_string(step_in_epoch));

  auto pvars = ProjectionVars<Scalar>::leaves(state.proj);
  auto mvars = MaskerVars<Scalar>::leaves(state.masker);
  auto graph = build_batch_loss(batch, pvars, mvars, state.masker, cfg.loss,
                                backends, noise_key);

  if (!std::isfinite(static_cast<double>(graph.breakdown.total))) {
    std::ostringstream msg;
    msg << "non-finite loss at epoch " << epoch << " step " << step_in_epoch
        << ": total=" << graph.breakdown.total
        << " acl_i=" << graph.breakdown.acl_i
        << " acl_f=" << graph.breakdown.acl_f
        << " reg=" << graph.breakdown.reg;
    throw AvlocError(msg.str());
  }

  ad::backward(graph.total);
  std::vector<Mat<Scalar>> grads = {
      pvars.w1.grad_or_zero(),   pvars.b1.grad_or_zero(),
      pvars.w2.grad_or_zero(),   pvars.b2.grad_or_zero(),
      pvars.attn.grad_or_zero(), mvars.w.grad_or_zero(),
      mvars.b.grad_or_zero()};
  adam_update(state, grads, cfg);

  StepRecord rec;
  rec.epoch = epoch;
  rec.step = global_step;
  rec.loss = static_cast<double>(graph.breakdown.total);
  rec.acl_i = static_cast<double>(graph.breakdown.acl_i);
  rec.acl_f = static_cast<double>(graph.breakdown.acl_f);
  rec.reg = static_cast<double>(graph.breakdown.reg);
  rec.mask_area_pos_mean =
      static_cast<double>(graph.breakdown.mask_area_pos_mean);
  return rec;
}

template <typename Scalar>
struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const TrainState<Scalar>&, int epoch)> on_epoch_end;
};

// Deterministic epoch order: seeded Fisher-Yates keyed by (seed, epoch).
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                            int epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(stream_key({seed, static_cast<std::uint64_t>(epoch), 0x0edeULL}));
  rng.shuffle(order);
  return order;
}

// Full optimization run over preloaded samples. Resumes from
// state.epochs_done; the last incomplete batch of each epoch is dropped.
// Backend weights are hash-checked before and after.
template <typename Scalar>
void train(TrainState<Scalar>& state,
           const std::vector<BatchSample<Scalar>>& samples,
           const BackendSet<Scalar>& backends, const TrainConfig<Scalar>& cfg,
           const TrainHooks<Scalar>& hooks = {}) {
  if (samples.empty()) throw ValidationError("train: empty dataset");
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw ValidationError("train: epochs and batch_size must be positive");

  const std::uint64_t frozen_hash = backends.weights_hash();
  const auto steps_per_epoch =
      static_cast<std::int64_t>(samples.size() /
                                static_cast<std::size_t>(cfg.batch_size));
  if (steps_per_epoch == 0)
    throw ValidationError("train: dataset smaller than one batch");

  for (int epoch = state.epochs_done; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(samples.size(), cfg.seed, epoch);
    for (std::int64_t s = 0; s < steps_per_epoch; ++s) {
      std::vector<BatchSample<Scalar>> batch;
      batch.reserve(static_cast<std::size_t>(cfg.batch_size));
      for (int k = 0; k < cfg.batch_size; ++k)
        batch.push_back(
            samples[order[static_cast<std::size_t>(s * cfg.batch_size + k)]]);
      StepRecord rec = train_step(state, batch, backends, cfg, epoch, s,
                                  epoch * steps_per_epoch + s);
      if (hooks.on_step) hooks.on_step(rec);
    }
    state.epochs_done = epoch + 1;
    if (hooks.on_epoch_end) hooks.on_epoch_end(state, epoch);
  }

  if (backends.weights_hash() != frozen_hash)
    throw AvlocError("train: frozen backend weights changed during the run");
}

}  // namespace avloc
