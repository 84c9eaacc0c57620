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

#include "avloc/io/tensor.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace avloc::io {

namespace {

void put_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw ParseError("truncated tensor header: " + path);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_tensor(const std::string& path, const MatF& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw AvlocError("cannot write tensor: " + path);
  f.write(kTensorMagic, 4);
  put_u32(f, kTensorDtypeF32);
  put_u32(f, static_cast<std::uint32_t>(m.rows()));
  put_u32(f, static_cast<std::uint32_t>(m.cols()));
  std::vector<float> row(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row[static_cast<std::size_t>(c)] = m(r, c);
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

MatF read_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open tensor: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kTensorMagic, 4) != 0)
    throw ParseError("bad tensor magic: " + path);
  const std::uint32_t dtype = get_u32(f, path);
  if (dtype != kTensorDtypeF32)
    throw ParseError("unsupported tensor dtype: " + path);
  const std::uint32_t rows = get_u32(f, path);
  const std::uint32_t cols = get_u32(f, path);
  MatF m(rows, cols);
  std::vector<float> row(cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(cols * sizeof(float)));
    if (!f) throw ParseError("truncated tensor payload: " + path);
    for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = row[c];
  }
  return m;
}

}  // namespace avloc::io
