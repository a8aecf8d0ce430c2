// notegate/deform.hpp

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

#include "notegate/rasterize.hpp"
#include "notegate/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace notegate {

/// Parameters for contextually realistic annotation corruption: time shifts
/// that respect note ordering, integer-semitone pitch changes, note deletion
/// and gap-constrained insertion.
struct DeformationConfig {
  // Per-note probabilities of each modification kind; at most one kind per
  // note per draw, so their sum must be <= 1. p_insert applies per gap
  // between consecutive notes.
  double p_onset_shift = 0.20;
  double p_offset_shift = 0.20;
  double p_pitch_shift = 0.25;
  double p_delete = 0.10;
  double p_insert = 0.30;

  double shift_min_sec = 0.05;
  double shift_max_sec = 0.40;
  int pitch_min_semitones = 1;
  int pitch_max_semitones = 5;
  double min_duration_sec = 0.10;

  std::uint64_t rng_seed = 0;
  int passes = 1;  // independent deformation draws in sample_negatives

  void validate() const;
};

DeformationConfig deformation_config_from_json_file(const std::filesystem::path& path);
std::string deformation_config_to_json(const DeformationConfig& cfg);

enum class DeformKind { onset, offset, pitch, erase, insert };

const char* to_string(DeformKind k);

/// Provenance of one modification. Shift magnitudes are the realized deltas
/// in seconds (clamped shifts record what was applied, not what was drawn),
/// pitch magnitudes are signed integer semitones.
struct DeformationRecord {
  DeformKind kind = DeformKind::onset;
  int note_index = -1;       // index into the original track; -1 for inserts
  double magnitude = 0.0;
  NoteEvent inserted;        // valid when kind == insert
};

struct DeformResult {
  NoteTrack track;
  std::vector<DeformationRecord> records;
};

/// Applies one randomized deformation pass. The input must be valid
/// (validate_notes empty); the output is valid again: shifts are clamped so
/// notes never overlap and never shrink below min_duration (or below their
/// own input duration when that is already shorter). Deterministic given
/// cfg.rng_seed.
DeformResult deform_track(const NoteTrack& notes, const DeformationConfig& cfg);

/// Rebuilds the deformed track from the original plus records. deform_track
/// output satisfies apply_records(input, records) == output exactly.
NoteTrack apply_records(const NoteTrack& original,
                        const std::vector<DeformationRecord>& records);

/// Frames whose label rows differ: {i : row i of a != row i of b}.
std::vector<Index> diff_frames(const LabelMatrix& a, const LabelMatrix& b);

/// JSON-lines audit log, one record per line.
void write_records_jsonl(const std::filesystem::path& path,
                         const std::vector<DeformationRecord>& records);

struct NegativeSampleResult {
  std::vector<PatchExample> examples;  // z = 1, patches built on deformed labels
  int warning_count = 0;               // passes that produced no usable frames
};

/// Draws z = 1 training examples: deforms the track (cfg.passes independent
/// draws, re-drawing up to max_retries extra times when a pass changes no
/// interior frame), rasterizes the deformed notes, and samples patch centers
/// without replacement from the interior frames where the deformed row
/// differs from the original.
NegativeSampleResult sample_negatives(const NoteTrack& notes,
                                      const SpectrogramStack& stack,
                                      const LabelMatrix& labels,
                                      const TimeGrid& tg, const FrequencyGrid& fg,
                                      const DeformationConfig& cfg, int n_samples,
                                      int context, int max_retries = 8);

}  // namespace notegate
