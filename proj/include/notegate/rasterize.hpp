// notegate/rasterize.hpp

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

/// Rasterizes note events onto the time/frequency grid: cell (i, j) is set
/// iff some note k has start <= frame_time(i) <= end (closed on both sides)
/// and bin_freq(j-1) < freq <= bin_freq(j).
///
/// Notes whose frequency falls outside the grid are skipped and reported in
/// `warnings` (never silently dropped); overlapping notes union into the
/// matrix without flagging.
LabelMatrix rasterize(const NoteTrack& notes, const TimeGrid& tg,
                      const FrequencyGrid& fg, Index n_frames,
                      std::vector<std::string>* warnings = nullptr);

struct NoteViolation {
  enum class Kind { overlap, non_positive_duration };
  Kind kind;
  int index_a = -1;  // note index
  int index_b = -1;  // second note of an overlap pair, else -1
};

/// Diagnostic pass: reports every overlapping [start, end) pair and every
/// note with end <= start. Empty result means the track is valid.
std::vector<NoteViolation> validate_notes(const NoteTrack& track);

/// Cuts the window [i - n, i + n] out of the stack and label matrix, as
/// bins x (2n+1) planes with out-of-range frames zero-padded.
Patch extract_patch(const SpectrogramStack& stack, const LabelMatrix& labels,
                    Index center, int context);

}  // namespace notegate
