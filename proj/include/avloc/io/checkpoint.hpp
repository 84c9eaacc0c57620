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

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "avloc/train.hpp"
#include "avloc/types.hpp"

namespace avloc::io {

// Checkpoint container: "AVCK", u32 format version, u64 JSON header length,
// the JSON header (counters, masker scalars' companions, tensor shapes, and
// the config snapshot), then raw little-endian float32 tensors row-major in
// header order. Trainable tensors first, then first and second Adam moments.
inline constexpr char kCheckpointMagic[4] = {'A', 'V', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void append_f32(std::string& out, float v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

template <typename Scalar>
void append_tensor(std::string& out, const Mat<Scalar>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      append_f32(out, static_cast<float>(m(r, c)));
}

template <typename Scalar>
Mat<Scalar> read_tensor_f32(const char*& p, const char* end, Eigen::Index rows,
                            Eigen::Index cols, const std::string& path) {
  const std::size_t need = static_cast<std::size_t>(rows * cols) * 4;
  if (static_cast<std::size_t>(end - p) < need)
    throw ParseError("truncated checkpoint payload: " + path);
  Mat<Scalar> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      float v;
      std::memcpy(&v, p, 4);
      p += 4;
      m(r, c) = static_cast<Scalar>(v);
    }
  return m;
}

}  // namespace detail

template <typename Scalar>
void save_checkpoint(const std::string& path, const TrainState<Scalar>& state,
                     const nlohmann::json& config_snapshot) {
  std::vector<Mat<Scalar>> params = avloc::detail::gather_trainables(state);
  std::vector<Mat<Scalar>> m = state.adam_m, v = state.adam_v;
  if (m.empty()) {
    for (const auto& p : params) {
      m.push_back(Mat<Scalar>::Zero(p.rows(), p.cols()));
      v.push_back(Mat<Scalar>::Zero(p.rows(), p.cols()));
    }
  }

  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["epochs_done"] = state.epochs_done;
  header["adam_t"] = state.adam_t;
  header["masker"] = {
      {"gumbel_temp", static_cast<double>(state.masker.gumbel_temp)},
      {"soft_theta", static_cast<double>(state.masker.soft_theta)},
      {"soft_temp", static_cast<double>(state.masker.soft_temp)}};
  nlohmann::json tensors = nlohmann::json::array();
  const auto& names = trainable_tensor_names();
  for (std::size_t k = 0; k < params.size(); ++k)
    tensors.push_back({{"name", names[k]},
                       {"rows", params[k].rows()},
                       {"cols", params[k].cols()}});
  header["tensors"] = tensors;
  header["config"] = config_snapshot;
  const std::string header_text = header.dump();

  std::string out;
  out.append(kCheckpointMagic, 4);
  const std::uint32_t version = kCheckpointVersion;
  char b4[4];
  std::memcpy(b4, &version, 4);
  out.append(b4, 4);
  const std::uint64_t hlen = header_text.size();
  char b8[8];
  std::memcpy(b8, &hlen, 8);
  out.append(b8, 8);
  out += header_text;
  for (const auto& t : params) detail::append_tensor(out, t);
  for (const auto& t : m) detail::append_tensor(out, t);
  for (const auto& t : v) detail::append_tensor(out, t);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw AvlocError("cannot write checkpoint: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

template <typename Scalar>
struct LoadedCheckpoint {
  TrainState<Scalar> state;
  nlohmann::json config;
};

template <typename Scalar>
LoadedCheckpoint<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 16 || std::memcmp(buf.data(), kCheckpointMagic, 4) != 0)
    throw ParseError("bad checkpoint magic: " + path);
  std::uint32_t version;
  std::memcpy(&version, buf.data() + 4, 4);
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version: " + path);
  std::uint64_t hlen;
  std::memcpy(&hlen, buf.data() + 8, 8);
  if (buf.size() < 16 + hlen)
    throw ParseError("truncated checkpoint header: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid checkpoint header: " + std::string(e.what()));
  }

  LoadedCheckpoint<Scalar> out;
  out.state.epochs_done = header.at("epochs_done").get<int>();
  out.state.adam_t = header.at("adam_t").get<std::int64_t>();
  out.state.masker.gumbel_temp =
      static_cast<Scalar>(header.at("masker").at("gumbel_temp").get<double>());
  out.state.masker.soft_theta =
      static_cast<Scalar>(header.at("masker").at("soft_theta").get<double>());
  out.state.masker.soft_temp =
      static_cast<Scalar>(header.at("masker").at("soft_temp").get<double>());
  out.config = header.value("config", nlohmann::json::object());

  const auto& names = trainable_tensor_names();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != names.size())
    throw ParseError("unexpected tensor count in checkpoint: " + path);

  const char* p = buf.data() + 16 + hlen;
  const char* end = buf.data() + buf.size();
  std::vector<Mat<Scalar>> params;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto& t = tensors[k];
    if (t.at("name").get<std::string>() != names[k])
      throw ParseError("unexpected tensor order in checkpoint: " + path);
    params.push_back(detail::read_tensor_f32<Scalar>(
        p, end, t.at("rows").get<Eigen::Index>(),
        t.at("cols").get<Eigen::Index>(), path));
  }
  for (std::size_t k = 0; k < names.size(); ++k)
    out.state.adam_m.push_back(detail::read_tensor_f32<Scalar>(
        p, end, params[k].rows(), params[k].cols(), path));
  for (std::size_t k = 0; k < names.size(); ++k)
    out.state.adam_v.push_back(detail::read_tensor_f32<Scalar>(
        p, end, params[k].rows(), params[k].cols(), path));
  avloc::detail::scatter_trainables(params, out.state);
  return out;
}

}  // namespace avloc::io
