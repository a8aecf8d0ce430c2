// notegate/select.hpp

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

#include <string>
#include <vector>

namespace notegate {

/// Agreement thresholds for picking "likely correct" frames. Both agreement
/// values must land in the half-open-below interval (lo, hi].
///
/// The two named profiles are disjoint by construction: the train profile
/// takes moderately confident frames, the test profile only the near-certain
/// ones, so holdout positives never leak into training when profiles drive
/// the split.
struct SelectionThresholds {
  enum class Profile { train, test };
  Profile profile = Profile::train;
  double kl_lo = 0.9, kl_hi = 0.999;  // local agreement bounds
  double kp_lo = 0.7, kp_hi = 0.85;   // patch agreement bounds
  int moving_avg_width = 11;          // k, frames; odd
  int silence_window = 200;           // v, frames
  double silence_quantile = 0.10;     // per-track energy quantile for "low energy"

  static SelectionThresholds train_profile();
  static SelectionThresholds test_profile();
};

/// Local agreement: max over bins of label * salience for one frame.
/// 0 exactly on unannotated frames.
double local_agreement(const Eigen::Ref<const Eigen::RowVectorX<std::uint8_t>>& label_row,
                       const Eigen::Ref<const Eigen::RowVectorXf>& salience_row);

/// Centered k-point moving average with truncated windows at the edges.
/// k must be odd and >= 1.
std::vector<double> patch_agreement(const std::vector<double>& local, int k);

/// Interior frames (center at least `context` frames from either edge) whose
/// local and patch agreement both fall inside the profile's bounds.
std::vector<Index> select_likely_correct(const LabelMatrix& labels,
                                         const SalienceMatrix& salience,
                                         const SelectionThresholds& th, int context);

/// Interior frames with no annotation anywhere in a centered window of
/// th.silence_window frames (window fully inside the track) and frame energy
/// at or below the track's silence_quantile. Tracks shorter than the window
/// yield an empty set and a warning.
std::vector<Index> select_silence_positives(const LabelMatrix& labels,
                                            const std::vector<double>& energy,
                                            const SelectionThresholds& th, int context,
                                            std::vector<std::string>* warnings = nullptr);

/// Self-contained stand-in for an external f0 estimator: the vocal channel,
/// max-normalized per frame (all-zero frames stay zero).
SalienceMatrix pseudo_salience(const SpectrogramStack& stack);

struct TrainingSet {
  std::vector<PatchExample> train;
  std::vector<PatchExample> holdout;
};

/// Balances the two classes to `positives_per_negative` (1.0 = 1:1) by
/// down-sampling the majority class, then splits by track so no track
/// contributes to both sides. Deterministic under seed. Throws DataError
/// naming the starved stage when either class is empty.
TrainingSet build_training_set(std::vector<PatchExample> positives,
                               std::vector<PatchExample> negatives,
                               double positives_per_negative, double holdout_fraction,
                               std::uint64_t seed);

}  // namespace notegate
