// notegate/nn/checkpoint.hpp

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

#include "notegate/nn/detector.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace notegate::nn {

/// NGCK container: magic "NGCK", u16 version, u32-length JSON metadata blob,
/// u32 parameter count, then per parameter u32 name length + name, u8 ndim,
/// ndim x u32 dims, float32 little-endian row-major data. Batch-norm running
/// statistics ride along as ordinary named tensors.
struct Checkpoint {
  static constexpr std::uint16_t kVersion = 1;

  struct NamedTensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;  // row-major
  };

  std::uint16_t version = kVersion;
  nlohmann::json metadata;  // architecture string, train config, metrics
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
/// Throws DataError on bad magic or an unsupported version.
Checkpoint load_checkpoint(const std::filesystem::path& path);

inline constexpr const char* kDetectorArchitecture = "notegate-error-detector-v1";

/// Snapshots every parameter (row-major float32) plus dropout/slope settings
/// under metadata.
template <typename Scalar>
Checkpoint checkpoint_from_detector(ErrorDetector<Scalar>& model,
                                    nlohmann::json metadata) {
  Checkpoint ck;
  metadata["architecture"] = kDetectorArchitecture;
  metadata["leaky_slope"] = static_cast<double>(model.leaky_slope);
  metadata["dropout_rate"] = static_cast<double>(model.dropout_rate);
  ck.metadata = std::move(metadata);
  for (const auto& p : parameter_refs(model, static_cast<DetectorGrads<Scalar>*>(nullptr))) {
    Checkpoint::NamedTensor t;
    t.name = p.name;
    t.dims = p.shape;
    t.data.resize(static_cast<std::size_t>(p.size()));
    // column-major parameter storage to row-major payload
    std::size_t k = 0;
    for (Index r = 0; r < p.rows; ++r)
      for (Index c = 0; c < p.cols; ++c)
        t.data[k++] = static_cast<float>(p.value[c * p.rows + r]);
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

template <typename Scalar>
ErrorDetector<Scalar> detector_from_checkpoint(const Checkpoint& ck) {
  if (!ck.metadata.contains("architecture") ||
      ck.metadata["architecture"] != kDetectorArchitecture)
    throw DataError("checkpoint does not hold a '" +
                    std::string(kDetectorArchitecture) + "' model");
  ErrorDetector<Scalar> model;
  model.leaky_slope = static_cast<Scalar>(ck.metadata.value("leaky_slope", 0.01));
  model.dropout_rate = static_cast<Scalar>(ck.metadata.value("dropout_rate", 0.3));
  for (const auto& p : parameter_refs(model, static_cast<DetectorGrads<Scalar>*>(nullptr))) {
    const auto* t = ck.find(p.name);
    if (!t) throw DataError("checkpoint is missing tensor '" + p.name + "'");
    if (static_cast<Index>(t->data.size()) != p.size())
      throw DataError("checkpoint tensor '" + p.name + "' has wrong size");
    std::size_t k = 0;
    for (Index r = 0; r < p.rows; ++r)
      for (Index c = 0; c < p.cols; ++c)
        p.value[c * p.rows + r] = static_cast<Scalar>(t->data[k++]);
  }
  return model;
}

}  // namespace notegate::nn
