#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "avloc/io/checkpoint.hpp"
#include "avloc/train.hpp"
#include "avloc/trainlog.hpp"
#include "test_support.hpp"

using namespace avloc;

namespace {

ToyBackendConfig tiny_config() {
  ToyBackendConfig cfg;
  cfg.seed = 31;
  cfg.input_size = 16;
  cfg.patch_grid = 2;
  cfg.spatial_dim = 5;
  cfg.clip_dim = 5;
  cfg.audio_dim = 4;
  cfg.spectrogram_bins = 3;
  cfg.token_dim = 3;
  return cfg;
}

template <typename Scalar>
std::vector<BatchSample<Scalar>> synth_samples(std::size_t n,
                                               const ToyBackendConfig& cfg,
                                               std::uint64_t seed) {
  std::vector<BatchSample<Scalar>> out(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    out[i].image.height = out[i].image.width = cfg.input_size;
    out[i].image.pixels = seeded_uniform<Scalar>(
        stream_key({seed, i, 1}), 3,
        static_cast<Eigen::Index>(cfg.input_size) * cfg.input_size, 0.0, 1.0);
    out[i].audio_features = seeded_uniform<Scalar>(
        stream_key({seed, i, 2}), 4, cfg.audio_dim, -1.0, 1.0);
  }
  return out;
}

template <typename Scalar>
TrainConfig<Scalar> tiny_train_config() {
  TrainConfig<Scalar> cfg;
  cfg.epochs = 1;
  cfg.batch_size = 2;
  cfg.seed = 77;
  cfg.hidden_dim = 4;
  return cfg;
}

template <typename Scalar>
bool states_equal(const TrainState<Scalar>& a, const TrainState<Scalar>& b) {
  auto ta = detail::gather_trainables(a);
  auto tb = detail::gather_trainables(b);
  for (std::size_t k = 0; k < ta.size(); ++k)
    if (std::memcmp(ta[k].data(), tb[k].data(),
                    sizeof(Scalar) * static_cast<std::size_t>(ta[k].size())) !=
        0)
      return false;
  if (a.adam_m.size() != b.adam_m.size()) return false;
  for (std::size_t k = 0; k < a.adam_m.size(); ++k) {
    if (std::memcmp(a.adam_m[k].data(), b.adam_m[k].data(),
                    sizeof(Scalar) *
                        static_cast<std::size_t>(a.adam_m[k].size())) != 0)
      return false;
    if (std::memcmp(a.adam_v[k].data(), b.adam_v[k].data(),
                    sizeof(Scalar) *
                        static_cast<std::size_t>(a.adam_v[k].size())) != 0)
      return false;
  }
  return a.adam_t == b.adam_t && a.epochs_done == b.epochs_done;
}

}  // namespace

TEST_CASE("train_step: one step matches a hand-rolled Adam recomputation") {
  auto toy = tiny_config();
  auto backends = make_toy_backends<double>(toy);
  auto tcfg = tiny_train_config<double>();
  auto samples = synth_samples<double>(2, toy, 900);

  TrainState<double> state =
      TrainState<double>::init(tcfg, MaskerParams<double>{}, toy.audio_dim,
                               toy.token_dim);
  state.proj.attn = test::random_matrix(901, tcfg.hidden_dim, 1, -0.5, 0.5);
  const TrainState<double> before = state;

  // Gradients from an identical forward/backward pass, then the update rule
  // applied independently of adam_update.
  auto pvars = ProjectionVars<double>::leaves(before.proj);
  auto mvars = MaskerVars<double>::leaves(before.masker);
  const std::uint64_t key = stream_key({tcfg.seed, 0, 0});
  auto graph = build_batch_loss(samples, pvars, mvars, before.masker,
                                tcfg.loss, backends, key);
  ad::backward(graph.total);
  std::vector<MatD> grads = {
      pvars.w1.grad_or_zero(),   pvars.b1.grad_or_zero(),
      pvars.w2.grad_or_zero(),   pvars.b2.grad_or_zero(),
      pvars.attn.grad_or_zero(), mvars.w.grad_or_zero(),
      mvars.b.grad_or_zero()};

  train_step(state, samples, backends, tcfg, 0, 0, 0);

  auto expected = detail::gather_trainables(before);
  for (std::size_t k = 0; k < expected.size(); ++k) {
    MatD g = grads[k] + tcfg.weight_decay * expected[k];  // coupled decay
    MatD m = 0.1 * g;                                     // (1-beta1) g
    MatD v = (0.001 * g.array().square()).matrix();       // (1-beta2) g^2
    MatD mhat = m / (1.0 - 0.9);
    MatD vhat = v / (1.0 - 0.999);
    expected[k] -=
        (tcfg.learning_rate * mhat.array() / (vhat.array().sqrt() + 1e-8))
            .matrix();
  }
  auto actual = detail::gather_trainables(state);
  for (std::size_t k = 0; k < expected.size(); ++k)
    CHECK((actual[k] - expected[k]).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("train_step: zero loss weights leave only weight decay") {
  auto toy = tiny_config();
  auto backends = make_toy_backends<double>(toy);
  auto tcfg = tiny_train_config<double>();
  tcfg.loss.lambda_acl_i = tcfg.loss.lambda_acl_f = tcfg.loss.lambda_reg = 0;
  auto samples = synth_samples<double>(2, toy, 910);

  SUBCASE("and no decay means bitwise-unchanged parameters") {
    tcfg.weight_decay = 0;
    TrainState<double> state = TrainState<double>::init(
        tcfg, MaskerParams<double>{}, toy.audio_dim, toy.token_dim);
    const auto before = detail::gather_trainables(state);
    train_step(state, samples, backends, tcfg, 0, 0, 0);
    const auto after = detail::gather_trainables(state);
    for (std::size_t k = 0; k < before.size(); ++k)
      CHECK((before[k] - after[k]).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("with decay the update is the decay-only Adam step") {
    TrainState<double> state = TrainState<double>::init(
        tcfg, MaskerParams<double>{}, toy.audio_dim, toy.token_dim);
    auto expected = detail::gather_trainables(state);
    train_step(state, samples, backends, tcfg, 0, 0, 0);
    for (auto& p : expected) {
      MatD g = tcfg.weight_decay * p;
      MatD mhat = (0.1 * g) / 0.1;
      MatD vhat = (0.001 * g.array().square()).matrix() / 0.001;
      p -= (tcfg.learning_rate * mhat.array() / (vhat.array().sqrt() + 1e-8))
               .matrix();
    }
    auto actual = detail::gather_trainables(state);
    for (std::size_t k = 0; k < expected.size(); ++k)
      CHECK((actual[k] - expected[k]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("train_step: loss decomposes into the three weighted terms") {
  auto toy = tiny_config();
  auto backends = make_toy_backends<float>(toy);
  auto tcfg = tiny_train_config<float>();
  tcfg.loss.lambda_acl_f = 2.0f;
  tcfg.loss.lambda_reg = 0.5f;
  auto samples = synth_samples<float>(2, toy, 920);
  TrainState<float> state = TrainState<float>::init(
      tcfg, MaskerParams<float>{}, toy.audio_dim, toy.token_dim);
  auto rec = train_step(state, samples, backends, tcfg, 0, 0, 0);
  CHECK(std::abs(rec.loss -
                 (1.0 * rec.acl_i + 2.0 * rec.acl_f + 0.5 * rec.reg)) < 1e-6);
}

TEST_CASE("train_step: non-finite loss aborts with the term breakdown") {
  auto toy = tiny_config();
  auto backends = make_toy_backends<double>(toy);
  auto tcfg = tiny_train_config<double>();
  auto samples = synth_samples<double>(2, toy, 930);

  SUBCASE("a loss that evaluates to infinity is reported with its terms") {
    tcfg.loss.lambda_reg = std::numeric_limits<double>::infinity();
    TrainState<double> state = TrainState<double>::init(
        tcfg, MaskerParams<double>{}, toy.audio_dim, toy.token_dim);
    CHECK_THROWS_WITH_AS(train_step(state, samples, backends, tcfg, 0, 0, 0),
                         doctest::Contains("non-finite loss"), AvlocError);
  }

  SUBCASE("poisoned parameters are caught before the forward pass") {
    TrainState<double> state = TrainState<double>::init(
        tcfg, MaskerParams<double>{}, toy.audio_dim, toy.token_dim);
    state.proj.w1(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(train_step(state, samples, backends, tcfg, 0, 0, 0),
                         doctest::Contains("non-finite parameters"),
                         AvlocError);
  }
}

TEST_CASE("train: epoch accounting and incomplete-batch drop") {
  auto toy = tiny_config();
  auto backends = make_toy_backends<float>(toy);
  auto tcfg = tiny_train_config<float>();
  tcfg.epochs = 3;

  int steps = 0;
  TrainHooks<float> hooks;
  hooks.on_step = [&](const StepRecord&) { ++steps; };

  SUBCASE("N == B runs exactly one step per epoch") {
    auto samples = synth_samples<float>(2, toy, 940);
    TrainState<float> state = TrainState<float>::init(
        tcfg, MaskerParams<float>{}, toy.audio_dim, toy.token_dim);
    tcfg.epochs = 1;
    train(state, samples, backends, tcfg, hooks);
    CHECK(steps == 1);
    CHECK(state.epochs_done == 1);
  }

  SUBCASE("the last incomplete batch is dropped") {
    auto samples = synth_samples<float>(5, toy, 941);  // B=2 -> 2 steps/epoch
    TrainState<float> state = TrainState<float>::init(
        tcfg, MaskerParams<float>{}, toy.audio_dim, toy.token_dim);
    train(state, samples, backends, tcfg, hooks);
    CHECK(steps == 6);
  }
}

TEST_CASE("train: identical seeds give bitwise-identical runs and logs") {
  auto toy = tiny_config();
  auto backends = make_toy_backends<float>(toy);
  auto tcfg = tiny_train_config<float>();
  tcfg.epochs = 2;
  auto samples = synth_samples<float>(4, toy, 950);

  auto run = [&](std::string* log) {
    TrainState<float> state = TrainState<float>::init(
        tcfg, MaskerParams<float>{}, toy.audio_dim, toy.token_dim);
    TrainHooks<float> hooks;
    hooks.on_step = [&](const StepRecord& rec) {
      *log += to_log_line(rec);
      *log += "\n";
    };
    train(state, samples, backends, tcfg, hooks);
    return state;
  };
  std::string log_a, log_b;
  auto sa = run(&log_a);
  auto sb = run(&log_b);
  CHECK(log_a == log_b);
  CHECK(!log_a.empty());
  CHECK(states_equal(sa, sb));
}

TEST_CASE("train: backend weights stay frozen while trainables move") {
  auto toy = tiny_config();
  auto backends = make_toy_backends<float>(toy);
  auto tcfg = tiny_train_config<float>();
  tcfg.epochs = 5;  // 10 steps at 2 steps/epoch
  auto samples = synth_samples<float>(4, toy, 960);

  const std::uint64_t hash_before = backends.weights_hash();
  TrainState<float> state = TrainState<float>::init(
      tcfg, MaskerParams<float>{}, toy.audio_dim, toy.token_dim);
  const auto params_before = detail::gather_trainables(state);
  train(state, samples, backends, tcfg);
  CHECK(backends.weights_hash() == hash_before);

  const auto params_after = detail::gather_trainables(state);
  bool any_changed = false;
  for (std::size_t k = 0; k < params_before.size(); ++k)
    if ((params_before[k] - params_after[k]).cwiseAbs().maxCoeff() > 0)
      any_changed = true;
  CHECK(any_changed);
  // Every trainable tensor moves: projection weights and both scalars.
  CHECK((params_before[0] - params_after[0]).cwiseAbs().maxCoeff() > 0);
  CHECK(params_before[5](0, 0) != params_after[5](0, 0));
  CHECK(params_before[6](0, 0) != params_after[6](0, 0));
}

TEST_CASE("checkpoint: save/load round-trips bitwise") {
  test::TempDir tmp("ckpt");
  auto toy = tiny_config();
  auto backends = make_toy_backends<float>(toy);
  auto tcfg = tiny_train_config<float>();
  auto samples = synth_samples<float>(2, toy, 970);
  TrainState<float> state = TrainState<float>::init(
      tcfg, MaskerParams<float>{}, toy.audio_dim, toy.token_dim);
  train(state, samples, backends, tcfg);

  nlohmann::json snapshot = {{"note", "unit-test"}, {"seed", 77}};
  const std::string p1 = tmp.file("a.ckpt"), p2 = tmp.file("b.ckpt");
  io::save_checkpoint(p1, state, snapshot);
  auto loaded = io::load_checkpoint<float>(p1);
  CHECK(states_equal(loaded.state, state));
  CHECK(loaded.config["note"] == "unit-test");

  io::save_checkpoint(p2, loaded.state, loaded.config);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK(!b1.empty());
}

TEST_CASE("train: resuming from a checkpoint reproduces the full run") {
  test::TempDir tmp("resume");
  auto toy = tiny_config();
  auto backends = make_toy_backends<float>(toy);
  auto tcfg = tiny_train_config<float>();
  tcfg.epochs = 4;
  auto samples = synth_samples<float>(4, toy, 980);

  TrainState<float> full = TrainState<float>::init(
      tcfg, MaskerParams<float>{}, toy.audio_dim, toy.token_dim);
  train(full, samples, backends, tcfg);

  // Interrupted run: two epochs, checkpoint, reload, continue.
  TrainState<float> part = TrainState<float>::init(
      tcfg, MaskerParams<float>{}, toy.audio_dim, toy.token_dim);
  auto tcfg_half = tcfg;
  tcfg_half.epochs = 2;
  train(part, samples, backends, tcfg_half);
  io::save_checkpoint(tmp.file("k2.ckpt"), part, nlohmann::json::object());
  auto resumed = io::load_checkpoint<float>(tmp.file("k2.ckpt")).state;
  CHECK(resumed.epochs_done == 2);
  train(resumed, samples, backends, tcfg);

  CHECK(states_equal(resumed, full));
}
