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

#include "avloc/io/pnm.hpp"

#include <cctype>
#include <fstream>

#include "avloc/types.hpp"

namespace avloc::io {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
int next_header_int(std::istream& in, const std::string& path) {
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
    } else if (!std::isspace(c)) {
      break;
    }
  }
  if (c == EOF) throw ParseError("truncated pnm header: " + path);
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw ParseError("malformed pnm header: " + path);
  return value;
}

void write_pnm(const std::string& path, const Raster& img, int channels,
               const char* magic) {
  if (img.channels != channels)
    throw ValidationError(std::string("write_") +
                          (channels == 1 ? "pgm" : "ppm") +
                          ": channel mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw AvlocError("cannot write image: " + path);
  f << magic << "\n" << img.width << " " << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
}

}  // namespace

Raster read_pnm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open image: " + path);
  char m0 = 0, m1 = 0;
  f.get(m0);
  f.get(m1);
  if (m0 != 'P' || (m1 != '5' && m1 != '6'))
    throw ParseError("unsupported image format (want binary PGM/PPM): " +
                     path);
  Raster img;
  img.channels = (m1 == '5') ? 1 : 3;
  img.width = next_header_int(f, path);
  img.height = next_header_int(f, path);
  const int maxval = next_header_int(f, path);
  if (maxval != 255)
    throw ParseError("pnm maxval must be 255: " + path);
  if (img.width <= 0 || img.height <= 0)
    throw ParseError("empty image: " + path);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height *
                        img.channels;
  img.data.resize(n);
  f.read(reinterpret_cast<char*>(img.data.data()),
         static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(f.gcount()) != n)
    throw ParseError("truncated pnm pixel data: " + path);
  return img;
}

void write_pgm(const std::string& path, const Raster& img) {
  write_pnm(path, img, 1, "P5");
}

void write_ppm(const std::string& path, const Raster& img) {
  write_pnm(path, img, 3, "P6");
}

}  // namespace avloc::io
