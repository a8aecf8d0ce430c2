// notegate/cqt.hpp

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

#include <optional>

namespace notegate {

/// Constant-Q magnitude spectrogram (frames x bins).
///
/// Time-domain filterbank: per bin, a Hann-windowed complex exponential of
/// length round(Q * sr / f) with Q = 1/(2^(1/12) - 1), centered on sample
/// i * hop for frame i (out-of-range samples treated as zero). The kernel
/// position depends only on i * hop, so delaying the input by exactly one
/// hop shifts the output by one frame.
///
/// Magnitudes are scaled so a full-scale sine reads ~1.0, then compressed
/// with log1p(mag * gamma) / log1p(gamma), gamma = 1000, clipped to [0, 1].
///
/// Rejects waveforms whose sample rate differs from the grid's; callers
/// resample offline.
Eigen::MatrixXf cqt(const Waveform& w, const FrequencyGrid& fg, const TimeGrid& tg);

/// Couples the mixture CQT with the vocal-stem CQT as a 2-channel stack.
/// Without a vocal matrix, the vocal channel duplicates the mixture and the
/// stack is flagged vocal_is_proxy.
SpectrogramStack stack_channels(const Eigen::MatrixXf& mixture,
                                const std::optional<Eigen::MatrixXf>& vocal);

/// Per-frame sum over bins of one channel (0 = mixture, 1 = vocal).
std::vector<double> frame_energy(const SpectrogramStack& stack, int channel);

}  // namespace notegate
