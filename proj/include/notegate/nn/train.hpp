// notegate/nn/train.hpp

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

#include "notegate/nn/checkpoint.hpp"
#include "notegate/nn/detector.hpp"
#include "notegate/select.hpp"

namespace notegate::nn {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;           // first-moment decay
  double beta2 = 0.999;         // second-moment decay
  double adam_eps = 1e-8;
  int batch_size = 32;
  int epochs = 30;
  int patience = 8;             // epochs without holdout improvement before stopping
  std::uint64_t seed = 0;
  double dropout_rate = 0.3;
  double leaky_slope = 0.01;

  nlohmann::json to_json() const;
};

struct EpochStats {
  double train_loss = 0, train_accuracy = 0;
  double holdout_loss = 0, holdout_accuracy = 0;
};

struct TrainResult {
  Checkpoint checkpoint;  // parameters of the best-holdout-accuracy epoch
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_holdout_accuracy = 0;
};

/// Trains the error detector with Adam on mean BCE, evaluating the holdout
/// split after every epoch (accuracy at threshold 0.5). Deterministic under
/// cfg.seed with a fixed thread count. Throws on divergence, naming the
/// epoch and batch.
TrainResult train_error_detector(const TrainingSet& data, const TrainConfig& cfg);

/// Mean loss and parameter gradients for one batch of examples. The mode is
/// the caller's: training uses train mode; verification wants frozen.
std::pair<double, DetectorGrads<float>> detector_backprop(
    ErrorDetector<float>& model, const std::vector<const PatchExample*>& batch,
    ErrorDetector<float>::Mode mode, Rng* dropout_rng);

/// Eval-mode scores, order-preserving.
std::vector<float> predict_batch(const ErrorDetector<float>& model,
                                 const std::vector<Patch>& patches,
                                 int batch_size = 128);
std::vector<float> predict_batch(const Checkpoint& ck, const std::vector<Patch>& patches,
                                 int batch_size = 128);

}  // namespace notegate::nn
