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

#include <string>

#include "avloc/types.hpp"

namespace avloc::io {

// Single-tensor container: 16-byte header (magic "AVT0", u32 dtype code,
// u32 rows, u32 cols, all little-endian) followed by rows*cols float32
// values in row-major order. dtype code 0 = float32.
inline constexpr char kTensorMagic[4] = {'A', 'V', 'T', '0'};
inline constexpr std::uint32_t kTensorDtypeF32 = 0;

void write_tensor(const std::string& path, const MatF& m);
MatF read_tensor(const std::string& path);

}  // namespace avloc::io
