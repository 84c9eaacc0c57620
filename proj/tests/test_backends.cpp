#include <doctest.h>

#include <cstring>

#include "avloc/backends.hpp"
#include "avloc/embedder.hpp"
#include "test_support.hpp"

using namespace avloc;
namespace adx = avloc::ad;

namespace {

ToyBackendConfig small_config() {
  ToyBackendConfig cfg;
  cfg.seed = 99;
  cfg.input_size = 32;
  cfg.patch_grid = 4;
  cfg.spatial_dim = 6;
  cfg.clip_dim = 6;
  cfg.audio_dim = 5;
  cfg.spectrogram_bins = 4;
  cfg.token_dim = 3;
  return cfg;
}

template <typename Scalar>
ImageTensor<Scalar> blank_image(int size) {
  ImageTensor<Scalar> img;
  img.height = img.width = size;
  img.pixels = Mat<Scalar>::Zero(3, static_cast<Eigen::Index>(size) * size);
  return img;
}

}  // namespace

// ---------------------------------------------------------------------------
// Image encoder
// ---------------------------------------------------------------------------

TEST_CASE("toy image encoder: zero image maps to zero features") {
  auto cfg = small_config();
  ToyImageEncoder<double> enc(cfg);
  auto [global, spatial] = enc.encode(blank_image<double>(cfg.input_size));
  CHECK(global.cwiseAbs().maxCoeff() == 0.0);
  CHECK(spatial.features.cwiseAbs().maxCoeff() == 0.0);
  CHECK(spatial.h == cfg.patch_grid);
  CHECK(spatial.w == cfg.patch_grid);
}

TEST_CASE("toy image encoder: bright patch dominates its grid cell") {
  auto cfg = small_config();
  ToyImageEncoder<double> enc(cfg);
  auto img = blank_image<double>(cfg.input_size);
  // One bright patch fully inside grid cell (2, 3).
  const int cell = cfg.input_size / cfg.patch_grid;
  for (int y = 2 * cell; y < 3 * cell; ++y)
    for (int x = 3 * cell; x < 4 * cell; ++x)
      img.pixels.col(static_cast<Eigen::Index>(y) * cfg.input_size + x)
          << 0.9, 0.4, 0.7;
  auto [global, spatial] = enc.encode(img);

  Eigen::Index best = -1;
  double best_norm = -1;
  for (Eigen::Index q = 0; q < spatial.features.cols(); ++q)
    if (spatial.features.col(q).norm() > best_norm) {
      best_norm = spatial.features.col(q).norm();
      best = q;
    }
  CHECK(best == 2 * cfg.patch_grid + 3);

  // Patch-mean oracle: each feature column is proj * mean of its patch.
  MatD oracle_means = MatD::Zero(3, cfg.patch_grid * cfg.patch_grid);
  for (int r = 0; r < cfg.patch_grid; ++r)
    for (int s = 0; s < cfg.patch_grid; ++s) {
      VecD acc = VecD::Zero(3);
      for (int y = r * cell; y < (r + 1) * cell; ++y)
        for (int x = s * cell; x < (s + 1) * cell; ++x)
          acc += img.pixels.col(static_cast<Eigen::Index>(y) * cfg.input_size +
                                x);
      oracle_means.col(r * cfg.patch_grid + s) = acc / (cell * cell);
    }
  CHECK((enc.patch_means(img) - oracle_means).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(global.norm() > 0.0);
}

TEST_CASE("toy image encoder: deterministic and size-checked") {
  auto cfg = small_config();
  ToyImageEncoder<float> enc(cfg);
  ImageTensor<float> img;
  img.height = img.width = cfg.input_size;
  img.pixels = seeded_uniform<float>(4, 3, cfg.input_size * cfg.input_size,
                                     -1.0, 1.0);
  auto a = enc.encode(img);
  auto b = enc.encode(img);
  CHECK(std::memcmp(a.first.data(), b.first.data(),
                    sizeof(float) * static_cast<std::size_t>(a.first.size())) ==
        0);
  CHECK(std::memcmp(a.second.features.data(), b.second.features.data(),
                    sizeof(float) * static_cast<std::size_t>(
                                        a.second.features.size())) == 0);

  ImageTensor<float> wrong;
  wrong.height = wrong.width = cfg.input_size + 1;
  wrong.pixels = Mat<float>::Zero(
      3, static_cast<Eigen::Index>(wrong.height) * wrong.width);
  CHECK_THROWS_AS(enc.encode(wrong), ValidationError);
}

// ---------------------------------------------------------------------------
// Audio encoder
// ---------------------------------------------------------------------------

TEST_CASE("toy audio encoder: silence maps to zero features, T from hop") {
  ToyBackendConfig cfg = small_config();
  ToyAudioEncoder<double> enc(cfg);
  AudioSegment<double> audio;
  audio.samples = VecD::Zero(160000);
  auto feats = enc.encode(audio);
  CHECK(feats.rows() == 20);  // 10 s / 0.5 s hop
  CHECK(feats.cols() == cfg.audio_dim);
  CHECK(feats.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("toy audio encoder: pure tone selects one projection column") {
  ToyBackendConfig cfg = small_config();
  ToyAudioEncoder<double> enc(cfg);
  for (int k = 0; k < cfg.spectrogram_bins; ++k) {
    AudioSegment<double> audio;
    audio.samples.resize(160000);
    const double f = enc.bin_frequency(k);
    for (Eigen::Index i = 0; i < audio.samples.size(); ++i)
      audio.samples(i) =
          std::sin(2.0 * M_PI * f * static_cast<double>(i) / 16000.0);
    auto feats = enc.encode(audio);
    for (Eigen::Index t = 0; t < feats.rows(); ++t)
      CHECK((feats.row(t).transpose() - enc.projection().col(k))
                .cwiseAbs()
                .maxCoeff() < 1e-6);
  }
}

TEST_CASE("toy audio encoder: rejects unpreprocessed audio") {
  ToyAudioEncoder<double> enc(small_config());
  AudioSegment<double> audio;
  audio.samples = VecD::Zero(1234);
  CHECK_THROWS_AS(enc.encode(audio), ValidationError);
}

// ---------------------------------------------------------------------------
// Token encoder
// ---------------------------------------------------------------------------

TEST_CASE("toy token encoder: zero continuous token yields placeholder sum") {
  ToyBackendConfig cfg = small_config();
  ToyTokenEncoder<double> enc(cfg);
  TokenSequence<double> seq;
  for (int id : {kTokenStart, kTokenA, kTokenPhoto, kTokenOf, kTokenA})
    seq.entries.push_back({false, id, {}});
  seq.entries.push_back({true, -1, VecD::Zero(cfg.token_dim)});
  seq.entries.push_back({false, kTokenEnd, {}});

  VecD oracle = VecD::Zero(cfg.clip_dim);
  for (int id : {kTokenStart, kTokenA, kTokenPhoto, kTokenOf, kTokenA,
                 kTokenEnd})
    oracle += enc.lookup().col(id);
  CHECK((enc.encode(seq) - oracle).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("toy token encoder: continuous token adds a seeded linear map") {
  ToyBackendConfig cfg = small_config();
  ToyTokenEncoder<double> enc(cfg);
  VecD u = test::random_matrix(31, cfg.token_dim, 1);
  TokenSequence<double> seq;
  seq.entries.push_back({false, kTokenStart, {}});
  seq.entries.push_back({true, -1, u});
  VecD oracle = enc.lookup().col(kTokenStart) + enc.token_projection() * u;
  CHECK((enc.encode(seq) - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("toy token encoder: distinct id sequences embed differently") {
  ToyTokenEncoder<double> enc(small_config());
  TokenSequence<double> a, b;
  a.entries.push_back({false, kTokenA, {}});
  b.entries.push_back({false, kTokenPhoto, {}});
  CHECK((enc.encode(a) - enc.encode(b)).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("toy token encoder: oversized sequence rejected") {
  ToyBackendConfig cfg = small_config();
  cfg.context_length = 3;
  ToyTokenEncoder<double> enc(cfg);
  TokenSequence<double> seq;
  for (int i = 0; i < 4; ++i) seq.entries.push_back({false, kTokenA, {}});
  CHECK_THROWS_AS(enc.encode(seq), ValidationError);
}

TEST_CASE("toy token encoder: graph gradient w.r.t. continuous token") {
  ToyBackendConfig cfg = small_config();
  ToyTokenEncoder<double> enc(cfg);
  MatD u0 = test::random_matrix(32, cfg.token_dim, 1);
  MatD probe = test::random_matrix(33, cfg.clip_dim, 1);
  auto leaf = adx::Var<double>::leaf(u0);
  auto emb = enc.encode(placeholder_ids(), leaf);
  auto y = adx::dot(emb, adx::Var<double>::constant(probe));
  adx::backward(y);
  MatD numeric = test::finite_diff(
      [&](const MatD& u) {
        auto e = enc.encode(placeholder_ids(), adx::Var<double>::constant(u));
        return adx::dot(e, adx::Var<double>::constant(probe)).scalar();
      },
      u0);
  CHECK(test::grad_rel_error(leaf.grad_or_zero(), numeric) < 1e-4);
}

// ---------------------------------------------------------------------------
// Grounder
// ---------------------------------------------------------------------------

namespace {

SpatialFeatures<double> equal_norm_features(int dim, int h, int w,
                                            std::uint64_t seed) {
  SpatialFeatures<double> sp;
  sp.h = h;
  sp.w = w;
  sp.features = test::random_matrix(seed, dim, h * w);
  for (Eigen::Index q = 0; q < sp.features.cols(); ++q)
    sp.features.col(q).normalize();
  return sp;
}

}  // namespace

TEST_CASE("toy grounder: orthogonal condition yields zero logits") {
  auto cfg = small_config();
  ToyGrounder<double> g(cfg);
  SpatialFeatures<double> sp;
  sp.h = sp.w = 2;
  sp.features = MatD::Zero(cfg.spatial_dim, 4);
  sp.features(0, 0) = 1.0;
  sp.features(1, 1) = 1.0;
  sp.features(0, 2) = 0.5;
  sp.features(1, 3) = -0.5;
  VecD cond = VecD::Zero(cfg.clip_dim);
  cond(2) = 3.0;  // orthogonal to every cell
  CHECK(g.ground(sp, cond).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("toy grounder: self-similar condition wins its own cell") {
  auto cfg = small_config();
  ToyGrounder<double> g(cfg);
  auto sp = equal_norm_features(cfg.spatial_dim, 3, 3, 41);
  VecD cond = sp.features.col(1 * 3 + 1);
  MatD logits = g.ground(sp, cond);
  Eigen::Index r, c;
  logits.maxCoeff(&r, &c);
  CHECK(r == 1);
  CHECK(c == 1);
}

TEST_CASE("toy grounder: matches the per-cell dot-product oracle") {
  auto cfg = small_config();
  cfg.ground_scale = 2.5;
  ToyGrounder<double> g(cfg);
  auto sp = equal_norm_features(cfg.spatial_dim, 4, 5, 42);
  VecD cond = test::random_matrix(43, cfg.clip_dim, 1);
  MatD logits = g.ground(sp, cond);
  REQUIRE(logits.rows() == 4);
  REQUIRE(logits.cols() == 5);
  for (int r = 0; r < 4; ++r)
    for (int s = 0; s < 5; ++s) {
      double oracle = 0;
      for (int d = 0; d < cfg.spatial_dim; ++d)
        oracle += cond(d) * sp.features(d, r * 5 + s);
      CHECK(logits(r, s) == doctest::Approx(2.5 * oracle).epsilon(1e-6));
    }
}

TEST_CASE("toy grounder: dimension mismatch rejected") {
  auto cfg = small_config();
  ToyGrounder<double> g(cfg);
  auto sp = equal_norm_features(cfg.spatial_dim, 2, 2, 44);
  VecD bad = VecD::Zero(cfg.clip_dim + 1);
  CHECK_THROWS_AS(g.ground(sp, bad), ValidationError);
}

TEST_CASE("toy grounder: graph gradient w.r.t. condition") {
  auto cfg = small_config();
  ToyGrounder<double> g(cfg);
  auto sp = equal_norm_features(cfg.spatial_dim, 3, 2, 45);
  MatD cond0 = test::random_matrix(46, cfg.clip_dim, 1);
  MatD probe = test::random_matrix(47, 3, 2);

  auto leaf = adx::Var<double>::leaf(cond0);
  auto y = adx::sum(adx::cmul(g.ground(sp, leaf),
                              adx::Var<double>::constant(probe)));
  adx::backward(y);
  MatD numeric = test::finite_diff(
      [&](const MatD& c) {
        auto logits = g.ground(sp, adx::Var<double>::constant(c));
        return adx::sum(adx::cmul(logits, adx::Var<double>::constant(probe)))
            .scalar();
      },
      cond0);
  CHECK(test::grad_rel_error(leaf.grad_or_zero(), numeric) < 1e-4);
}

// ---------------------------------------------------------------------------
// Backend set
// ---------------------------------------------------------------------------

TEST_CASE("toy backend set: weights depend only on the seed") {
  auto cfg = small_config();
  auto a = make_toy_backends<double>(cfg);
  auto b = make_toy_backends<double>(cfg);
  CHECK(a.weights_hash() == b.weights_hash());
  cfg.seed += 1;
  auto c = make_toy_backends<double>(cfg);
  CHECK(a.weights_hash() != c.weights_hash());
}

TEST_CASE("pretrained backends report their absence") {
  CHECK_THROWS_WITH_AS(make_pretrained_backends<float>("/tmp/weights"),
                       doctest::Contains("not bundled"), AvlocError);
}
