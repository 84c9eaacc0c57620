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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "avloc/types.hpp"

namespace avloc {

// One axis of a bilinear resampling: output index i interpolates between
// source indices lo[i] and hi[i] with weight w[i] on hi. Source coordinates
// follow the half-pixel convention x_src = (x_dst + 0.5) * src/dst - 0.5,
// clamped to the valid range.
struct ResizeAxis {
  std::vector<int> lo, hi;
  std::vector<double> w;

  static ResizeAxis make(int src, int dst) {
    ResizeAxis a;
    a.lo.resize(dst);
    a.hi.resize(dst);
    a.w.resize(dst);
    const double scale = static_cast<double>(src) / static_cast<double>(dst);
    for (int i = 0; i < dst; ++i) {
      double x = (i + 0.5) * scale - 0.5;
      if (x < 0) x = 0;
      if (x > src - 1) x = src - 1;
      int l = static_cast<int>(std::floor(x));
      int h = std::min(l + 1, src - 1);
      a.lo[i] = l;
      a.hi[i] = h;
      a.w[i] = x - l;
    }
    return a;
  }
};

// Bilinear resize of a grid stored as rows x cols matrix.
template <typename Scalar>
Mat<Scalar> resize_bilinear(const Mat<Scalar>& src, int out_rows,
                            int out_cols) {
  if (src.rows() < 1 || src.cols() < 1)
    throw ValidationError("resize_bilinear: empty input");
  const ResizeAxis ay = ResizeAxis::make(static_cast<int>(src.rows()), out_rows);
  const ResizeAxis ax = ResizeAxis::make(static_cast<int>(src.cols()), out_cols);
  // Horizontal pass, then vertical (bilinear is separable).
  Mat<Scalar> tmp(src.rows(), out_cols);
  for (Eigen::Index r = 0; r < src.rows(); ++r)
    for (int c = 0; c < out_cols; ++c) {
      const Scalar w = static_cast<Scalar>(ax.w[c]);
      tmp(r, c) = (Scalar(1) - w) * src(r, ax.lo[c]) + w * src(r, ax.hi[c]);
    }
  Mat<Scalar> out(out_rows, out_cols);
  for (int r = 0; r < out_rows; ++r) {
    const Scalar w = static_cast<Scalar>(ay.w[r]);
    out.row(r) = (Scalar(1) - w) * tmp.row(ay.lo[r]) + w * tmp.row(ay.hi[r]);
  }
  return out;
}

// Nearest-neighbor resize; used for binary annotations so values stay binary.
template <typename Scalar>
Mat<Scalar> resize_nearest(const Mat<Scalar>& src, int out_rows,
                           int out_cols) {
  if (src.rows() < 1 || src.cols() < 1)
    throw ValidationError("resize_nearest: empty input");
  Mat<Scalar> out(out_rows, out_cols);
  const double sy = static_cast<double>(src.rows()) / out_rows;
  const double sx = static_cast<double>(src.cols()) / out_cols;
  for (int r = 0; r < out_rows; ++r) {
    int rs = std::min<int>(static_cast<int>((r + 0.5) * sy),
                           static_cast<int>(src.rows()) - 1);
    for (int c = 0; c < out_cols; ++c) {
      int cs = std::min<int>(static_cast<int>((c + 0.5) * sx),
                             static_cast<int>(src.cols()) - 1);
      out(r, c) = src(rs, cs);
    }
  }
  return out;
}

// Upsamples a grid to a flat row-major field of out_rows*out_cols pixels.
// Shared by the mask pipeline and its gradient transpose. The _into form
// reuses the output buffer on hot paths.
template <typename Scalar>
void upsample_flat_into(const Mat<Scalar>& grid, const ResizeAxis& ay,
                        const ResizeAxis& ax, Mat<Scalar>& out) {
  const int oh = static_cast<int>(ay.lo.size());
  const int ow = static_cast<int>(ax.lo.size());
  out.resize(1, static_cast<Eigen::Index>(oh) * ow);
  // Horizontal pass on the small grid, vertical pass while writing out.
  Mat<Scalar> tmp(grid.rows(), ow);
  for (Eigen::Index r = 0; r < grid.rows(); ++r)
    for (int c = 0; c < ow; ++c) {
      const Scalar w = static_cast<Scalar>(ax.w[c]);
      tmp(r, c) = (Scalar(1) - w) * grid(r, ax.lo[c]) + w * grid(r, ax.hi[c]);
    }
  for (int r = 0; r < oh; ++r) {
    const Scalar w = static_cast<Scalar>(ay.w[r]);
    for (int c = 0; c < ow; ++c)
      out(0, static_cast<Eigen::Index>(r) * ow + c) =
          (Scalar(1) - w) * tmp(ay.lo[r], c) + w * tmp(ay.hi[r], c);
  }
}

template <typename Scalar>
Mat<Scalar> upsample_flat(const Mat<Scalar>& grid, const ResizeAxis& ay,
                          const ResizeAxis& ax) {
  Mat<Scalar> out;
  upsample_flat_into(grid, ay, ax, out);
  return out;
}

// Transpose of upsample_flat: scatters a flat cotangent field back onto the
// grid. grad_flat is 1 x (oh*ow); the result has the grid's shape.
template <typename Scalar>
Mat<Scalar> upsample_flat_transpose(const Mat<Scalar>& grad_flat,
                                    Eigen::Index grid_rows,
                                    Eigen::Index grid_cols,
                                    const ResizeAxis& ay,
                                    const ResizeAxis& ax) {
  const int oh = static_cast<int>(ay.lo.size());
  const int ow = static_cast<int>(ax.lo.size());
  Mat<Scalar> tmp = Mat<Scalar>::Zero(grid_rows, ow);
  for (int r = 0; r < oh; ++r) {
    const Scalar w = static_cast<Scalar>(ay.w[r]);
    for (int c = 0; c < ow; ++c) {
      const Scalar g = grad_flat(0, static_cast<Eigen::Index>(r) * ow + c);
      tmp(ay.lo[r], c) += (Scalar(1) - w) * g;
      tmp(ay.hi[r], c) += w * g;
    }
  }
  Mat<Scalar> out = Mat<Scalar>::Zero(grid_rows, grid_cols);
  for (Eigen::Index r = 0; r < grid_rows; ++r)
    for (int c = 0; c < ow; ++c) {
      const Scalar w = static_cast<Scalar>(ax.w[c]);
      out(r, ax.lo[c]) += (Scalar(1) - w) * tmp(r, c);
      out(r, ax.hi[c]) += w * tmp(r, c);
    }
  return out;
}

}  // namespace avloc
