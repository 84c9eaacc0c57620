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

#include "avloc/io/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "avloc/types.hpp"

namespace avloc::io {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open wav file: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw ParseError("not a RIFF/WAVE file: " + path);

  int channels = 0, bits = 0, format = 0;
  WavData out;
  std::size_t pos = 12;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  while (pos + 8 <= buf.size()) {
    const char* tag = reinterpret_cast<const char*>(buf.data() + pos);
    const std::uint32_t size = read_u32(buf.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > buf.size())
      throw ParseError("truncated wav chunk in " + path);
    if (std::memcmp(tag, "fmt ", 4) == 0 && size >= 16) {
      format = read_u16(buf.data() + body);
      channels = read_u16(buf.data() + body + 2);
      out.sample_rate = static_cast<int>(read_u32(buf.data() + body + 4));
      bits = read_u16(buf.data() + body + 14);
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data = buf.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1);  // chunks are word aligned
  }
  if (channels <= 0 || out.sample_rate <= 0 || data == nullptr)
    throw ParseError("missing fmt or data chunk in " + path);

  const std::size_t bytes_per_sample = static_cast<std::size_t>(bits) / 8;
  if (format == 1 && bits == 16) {
    const std::size_t frames = data_size / (bytes_per_sample * channels);
    out.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
      double acc = 0.0;
      for (int c = 0; c < channels; ++c) {
        const unsigned char* p = data + (i * channels + c) * 2;
        const std::int16_t s =
            static_cast<std::int16_t>(p[0] | (p[1] << 8));
        acc += static_cast<double>(s) / 32768.0;
      }
      out.samples[i] = acc / channels;
    }
  } else if (format == 3 && bits == 32) {
    const std::size_t frames = data_size / (bytes_per_sample * channels);
    out.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
      double acc = 0.0;
      for (int c = 0; c < channels; ++c) {
        float v;
        std::memcpy(&v, data + (i * channels + c) * 4, 4);
        acc += static_cast<double>(v);
      }
      out.samples[i] = acc / channels;
    }
  } else {
    throw ParseError("unsupported wav encoding (want PCM16 or float32): " +
                     path);
  }
  return out;
}

void write_wav(const std::string& path, const std::vector<double>& samples,
               int sample_rate) {
  std::string body;
  body.reserve(44 + samples.size() * 2);
  const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * 2);
  body += "RIFF";
  put_u32(body, 36 + data_size);
  body += "WAVEfmt ";
  put_u32(body, 16);
  put_u16(body, 1);  // PCM
  put_u16(body, 1);  // mono
  put_u32(body, static_cast<std::uint32_t>(sample_rate));
  put_u32(body, static_cast<std::uint32_t>(sample_rate * 2));
  put_u16(body, 2);
  put_u16(body, 16);
  body += "data";
  put_u32(body, data_size);
  for (double s : samples) {
    const double v = std::clamp(s, -1.0, 1.0);
    const long q = std::clamp(std::lround(v * 32768.0), -32768L, 32767L);
    put_u16(body, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw AvlocError("cannot write wav file: " + path);
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
}

}  // namespace avloc::io
