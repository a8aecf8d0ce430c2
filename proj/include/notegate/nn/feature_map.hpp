// notegate/nn/feature_map.hpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "notegate/types.hpp"

#include <vector>

namespace notegate::nn {

/// One example's activation map, stored channel-last: row y*w + x holds the
/// channel vector at spatial position (y, x). This keeps convolution an
/// im2col + GEMM pair and batch-norm a column reduction.
template <typename Scalar>
struct FeatureMap {
  int h = 0, w = 0;
  MatrixX<Scalar> m;  // (h*w) x channels

  int channels() const { return static_cast<int>(m.cols()); }
  bool all_finite() const { return m.allFinite(); }
};

template <typename Scalar>
using Batch = std::vector<FeatureMap<Scalar>>;

/// Assembles the detector input from a patch: channels (mixture, vocal,
/// labels), h = bins, w = patch width.
template <typename Scalar>
FeatureMap<Scalar> to_feature_map(const Patch& p) {
  FeatureMap<Scalar> f;
  f.h = static_cast<int>(p.bins());
  f.w = static_cast<int>(p.width());
  f.m.resize(static_cast<Index>(f.h) * f.w, 3);
  for (int y = 0; y < f.h; ++y)
    for (int x = 0; x < f.w; ++x) {
      const Index r = static_cast<Index>(y) * f.w + x;
      f.m(r, 0) = static_cast<Scalar>(p.mixture(y, x));
      f.m(r, 1) = static_cast<Scalar>(p.vocal(y, x));
      f.m(r, 2) = static_cast<Scalar>(p.labels(y, x));
    }
  return f;
}

}  // namespace notegate::nn
