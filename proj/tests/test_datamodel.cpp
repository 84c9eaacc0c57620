#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "avloc/audio.hpp"
#include "avloc/image.hpp"
#include "avloc/io/pnm.hpp"
#include "avloc/io/wav.hpp"
#include "avloc/manifest.hpp"
#include "test_support.hpp"

using namespace avloc;

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

TEST_CASE("manifest: minimal record has no annotation") {
  auto ds = parse_manifest(
      R"({"id":"a","image_path":"i.png","audio_path":"a.wav"})"
      "\n");
  REQUIRE(ds.records.size() == 1);
  CHECK(ds.records[0].id == "a");
  CHECK_FALSE(ds.records[0].has_annotation());
  CHECK(ds.records[0].polarity == Polarity::kPositive);
}

TEST_CASE("manifest: single box annotation") {
  auto ds = parse_manifest(
      R"({"id":"a","image_path":"i.png","audio_path":"a.wav","boxes":[[0,0,10,10]]})"
      "\n");
  REQUIRE(ds.records.size() == 1);
  REQUIRE(ds.records[0].boxes.size() == 1);
  CHECK(ds.records[0].boxes[0] == Box{0, 0, 10, 10});
  CHECK_FALSE(ds.records[0].has_mask());
}

TEST_CASE("manifest: duplicate id rejected") {
  const std::string text =
      R"({"id":"a","image_path":"1.png","audio_path":"1.wav"})"
      "\n"
      R"({"id":"b","image_path":"2.png","audio_path":"2.wav"})"
      "\n"
      R"({"id":"a","image_path":"3.png","audio_path":"3.wav"})"
      "\n";
  CHECK_THROWS_WITH_AS(parse_manifest(text),
                       doctest::Contains("duplicate id \"a\""),
                       ValidationError);
}

TEST_CASE("manifest: missing key names the line") {
  const std::string text =
      R"({"id":"a","image_path":"1.png","audio_path":"1.wav"})"
      "\n"
      R"({"id":"b","image_path":"2.png"})"
      "\n";
  CHECK_THROWS_WITH_AS(parse_manifest(text), doctest::Contains(":2:"),
                       ParseError);
}

TEST_CASE("manifest: boxes and mask together rejected") {
  const std::string text =
      R"({"id":"a","image_path":"i.png","audio_path":"a.wav","boxes":[[0,0,1,1]],"mask_path":"m.pgm"})"
      "\n";
  CHECK_THROWS_AS(parse_manifest(text), ValidationError);
}

TEST_CASE("manifest: serialize then parse round-trips") {
  const std::string text =
      R"({"id":"a","image_path":"i.png","audio_path":"a.wav"})"
      "\n"
      R"({"id":"b","image_path":"j.png","audio_path":"b.wav","boxes":[[1,2,30,40],[5,6,7,8]]})"
      "\n"
      R"({"id":"c","image_path":"k.png","audio_path":"c.wav","mask_path":"m.pgm","polarity":"non_audible"})"
      "\n";
  auto ds = parse_manifest(text);
  auto ds2 = parse_manifest(serialize_manifest(ds));
  REQUIRE(ds2.records.size() == ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(ds2.records[i].id == ds.records[i].id);
    CHECK(ds2.records[i].image_path == ds.records[i].image_path);
    CHECK(ds2.records[i].audio_path == ds.records[i].audio_path);
    CHECK(ds2.records[i].boxes == ds.records[i].boxes);
    CHECK(ds2.records[i].mask_path == ds.records[i].mask_path);
    CHECK(ds2.records[i].polarity == ds.records[i].polarity);
  }
}

// ---------------------------------------------------------------------------
// Audio preprocessing
// ---------------------------------------------------------------------------

TEST_CASE("preprocess_audio: conformant input is unchanged") {
  std::vector<double> raw(160000);
  Rng rng(3);
  for (auto& s : raw) s = rng.next_uniform(-0.9, 0.9);
  auto seg = preprocess_audio<double>(raw, 16000);
  REQUIRE(seg.samples.size() == 160000);
  for (int i = 0; i < 160000; i += 997)
    CHECK(seg.samples(i) == raw[static_cast<std::size_t>(i)]);
}

TEST_CASE("preprocess_audio: short input is tiled from the start") {
  std::vector<double> raw(80000);
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = std::sin(0.001 * static_cast<double>(i));
  auto seg = preprocess_audio<double>(raw, 16000);
  REQUIRE(seg.samples.size() == 160000);
  for (int i = 0; i < 80000; i += 499) {
    CHECK(seg.samples(i) == raw[static_cast<std::size_t>(i)]);
    CHECK(seg.samples(80000 + i) == raw[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("preprocess_audio: long input is center-cropped") {
  // Ramp oracle: sample k of the output must be input sample start + k,
  // with start = (n - target) / 2.
  const std::size_t n = 320000;
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i)
    raw[i] = static_cast<double>(i) / static_cast<double>(n);
  auto seg = preprocess_audio<double>(raw, 16000);
  REQUIRE(seg.samples.size() == 160000);
  const std::size_t start = (n - 160000) / 2;
  for (int k = 0; k < 160000; k += 1009)
    CHECK(seg.samples(k) == raw[start + static_cast<std::size_t>(k)]);
}

TEST_CASE("preprocess_audio: amplitude is clipped") {
  std::vector<double> raw(160000, 2.5);
  auto seg = preprocess_audio<double>(raw, 16000);
  CHECK(seg.samples.maxCoeff() == 1.0);
}

TEST_CASE("preprocess_audio: zero-length input rejected") {
  CHECK_THROWS_AS(preprocess_audio<double>({}, 16000), ValidationError);
}

TEST_CASE("preprocess_audio: idempotent on its own output") {
  Rng rng(11);
  for (int trial = 0; trial < 4; ++trial) {
    const auto n = static_cast<std::size_t>(rng.next_uniform(1000, 400000));
    std::vector<double> raw(n);
    for (auto& s : raw) s = rng.next_uniform(-2.0, 2.0);
    auto once = preprocess_audio<double>(raw, 16000);
    std::vector<double> again(once.samples.data(),
                              once.samples.data() + once.samples.size());
    auto twice = preprocess_audio<double>(again, once.sample_rate);
    CHECK((once.samples - twice.samples).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("preprocess_audio: resamples other rates to the target length") {
  std::vector<double> raw(441000, 0.25);  // 10 s at 44.1 kHz
  auto seg = preprocess_audio<double>(raw, 44100);
  CHECK(seg.samples.size() == 160000);
  CHECK(seg.samples.minCoeff() == doctest::Approx(0.25));
}

// ---------------------------------------------------------------------------
// Image preprocessing
// ---------------------------------------------------------------------------

namespace {

// Direct per-pixel bilinear oracle, half-pixel convention.
double bilinear_oracle(const MatD& src, int out_rows, int out_cols, int r,
                       int c) {
  auto src_coord = [](int idx, int dst, int srcn) {
    double x = (idx + 0.5) * (static_cast<double>(srcn) / dst) - 0.5;
    return std::min(std::max(x, 0.0), static_cast<double>(srcn - 1));
  };
  const double y = src_coord(r, out_rows, static_cast<int>(src.rows()));
  const double x = src_coord(c, out_cols, static_cast<int>(src.cols()));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, static_cast<int>(src.rows()) - 1);
  const int x1 = std::min(x0 + 1, static_cast<int>(src.cols()) - 1);
  const double wy = y - y0, wx = x - x0;
  return (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
         wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
}

io::Raster constant_raster(int h, int w, std::uint8_t r, std::uint8_t g,
                           std::uint8_t b) {
  io::Raster img;
  img.width = w;
  img.height = h;
  img.channels = 3;
  img.data.resize(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  return img;
}

}  // namespace

TEST_CASE("preprocess_image: constant gray at native size") {
  auto raw = constant_raster(352, 352, 128, 128, 128);
  ImagePreprocessConfig cfg;
  auto img = preprocess_image<double>(raw, cfg);
  REQUIRE(img.pixels.cols() == 352 * 352);
  for (int c = 0; c < 3; ++c) {
    const double expected = (128.0 / 255.0 - cfg.mean[c]) / cfg.std[c];
    CHECK(img.pixels(c, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK((img.pixels.row(c).array() - img.pixels(c, 0)).abs().maxCoeff() ==
          0.0);
  }
}

TEST_CASE("preprocess_image: checkerboard downscale matches bilinear oracle") {
  const int n = 704;
  io::Raster raw = constant_raster(n, n, 0, 0, 0);
  MatD plane(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const std::uint8_t v = ((x / 4 + y / 4) % 2) ? 255 : 0;
      raw.at(y, x, 0) = raw.at(y, x, 1) = raw.at(y, x, 2) = v;
      plane(y, x) = v / 255.0;
    }
  ImagePreprocessConfig cfg;
  cfg.mean = {0, 0, 0};
  cfg.std = {1, 1, 1};
  auto img = preprocess_image<double>(raw, cfg);

  for (int r = 0; r < 352; r += 37)
    for (int c = 0; c < 352; c += 41)
      CHECK(img.pixels(0, static_cast<Eigen::Index>(r) * 352 + c) ==
            doctest::Approx(bilinear_oracle(plane, 352, 352, r, c))
                .epsilon(1e-12));
  CHECK(img.pixels.row(0).mean() ==
        doctest::Approx(plane.mean()).epsilon(1e-3));
}

TEST_CASE("preprocess_image: 1x1 input extends to a constant tensor") {
  auto raw = constant_raster(1, 1, 10, 200, 30);
  ImagePreprocessConfig cfg;
  cfg.mean = {0, 0, 0};
  cfg.std = {1, 1, 1};
  auto img = preprocess_image<double>(raw, cfg);
  CHECK((img.pixels.row(0).array() - 10.0 / 255.0).abs().maxCoeff() == 0.0);
  CHECK((img.pixels.row(1).array() - 200.0 / 255.0).abs().maxCoeff() == 0.0);
  CHECK((img.pixels.row(2).array() - 30.0 / 255.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("preprocess_image: non-3-channel input rejected") {
  io::Raster gray;
  gray.width = gray.height = 4;
  gray.channels = 1;
  gray.data.assign(16, 7);
  CHECK_THROWS_AS(preprocess_image<double>(gray), ValidationError);
}

TEST_CASE("preprocess_image: deterministic, bitwise") {
  Rng rng(21);
  io::Raster raw = constant_raster(100, 64, 0, 0, 0);
  for (auto& v : raw.data)
    v = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
  auto a = preprocess_image<float>(raw);
  auto b = preprocess_image<float>(raw);
  CHECK(std::memcmp(a.pixels.data(), b.pixels.data(),
                    sizeof(float) * static_cast<std::size_t>(
                                        a.pixels.size())) == 0);
}

// ---------------------------------------------------------------------------
// Raster and waveform I/O
// ---------------------------------------------------------------------------

TEST_CASE("pnm round-trip preserves bytes") {
  test::TempDir tmp("pnm");
  io::Raster img = constant_raster(5, 7, 0, 0, 0);
  Rng rng(5);
  for (auto& v : img.data)
    v = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
  io::write_ppm(tmp.file("x.ppm"), img);
  auto back = io::read_pnm(tmp.file("x.ppm"));
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  CHECK(back.channels == 3);
  CHECK(back.data == img.data);

  io::Raster gray;
  gray.width = 3;
  gray.height = 2;
  gray.channels = 1;
  gray.data = {0, 255, 128, 7, 9, 11};
  io::write_pgm(tmp.file("y.pgm"), gray);
  auto gback = io::read_pnm(tmp.file("y.pgm"));
  CHECK(gback.channels == 1);
  CHECK(gback.data == gray.data);
}

TEST_CASE("wav round-trip is lossless at PCM16 precision") {
  test::TempDir tmp("wav");
  std::vector<double> samples(16000);
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = 0.75 * std::sin(2.0 * M_PI * 220.0 *
                                 static_cast<double>(i) / 16000.0);
  io::write_wav(tmp.file("t.wav"), samples, 16000);
  auto back = io::read_wav(tmp.file("t.wav"));
  CHECK(back.sample_rate == 16000);
  REQUIRE(back.samples.size() == samples.size());
  double worst = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    worst = std::max(worst, std::abs(back.samples[i] - samples[i]));
  CHECK(worst < 1.0 / 32000.0);
}
