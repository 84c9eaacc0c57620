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

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace avloc {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using MatD = Mat<double>;
using VecF = Vec<float>;
using VecD = Vec<double>;

// Spatial fields (masks, logit maps, images) are stored flat in row-major
// pixel order: index p = y * width + x. Channel data is rows of a
// channels x (h*w) matrix. The helpers below convert between an Eigen
// (column-major) h x w matrix and that flat layout.
template <typename Scalar>
Mat<Scalar> flatten_rowmajor(const Mat<Scalar>& grid) {
  Mat<Scalar> flat(1, grid.size());
  for (Eigen::Index r = 0; r < grid.rows(); ++r)
    for (Eigen::Index c = 0; c < grid.cols(); ++c)
      flat(0, r * grid.cols() + c) = grid(r, c);
  return flat;
}

template <typename Scalar>
Mat<Scalar> unflatten_rowmajor(const Mat<Scalar>& flat, Eigen::Index rows,
                               Eigen::Index cols) {
  if (flat.size() != rows * cols)
    throw std::invalid_argument("unflatten_rowmajor: size mismatch");
  Mat<Scalar> grid(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      grid(r, c) = flat(r * cols + c);
  return grid;
}

template <typename Scalar>
bool all_finite(const Mat<Scalar>& m) {
  return m.allFinite();
}

class AvlocError : public std::runtime_error {
 public:
  explicit AvlocError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when parsing manifests, configs, or binary containers fails.
class ParseError : public AvlocError {
 public:
  explicit ParseError(const std::string& what) : AvlocError(what) {}
};

// Raised when inputs violate a documented precondition.
class ValidationError : public AvlocError {
 public:
  explicit ValidationError(const std::string& what) : AvlocError(what) {}
};

}  // namespace avloc
