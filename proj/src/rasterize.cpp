// src/rasterize.cpp

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

#include "notegate/rasterize.hpp"

#include <algorithm>
#include <cmath>

namespace notegate {

void NoteTrack::sort_by_start() {
  std::stable_sort(notes.begin(), notes.end(),
                   [](const NoteEvent& a, const NoteEvent& b) {
                     return a.start_sec < b.start_sec;
                   });
}

LabelMatrix rasterize(const NoteTrack& track, const TimeGrid& tg,
                      const FrequencyGrid& fg, Index n_frames,
                      std::vector<std::string>* warnings) {
  if (n_frames <= 0) throw std::invalid_argument("rasterize: n_frames must be > 0");
  LabelMatrix out;
  out.data = MatrixX<std::uint8_t>::Zero(n_frames, fg.n_bins);

  const double period = tg.frame_period();
  for (std::size_t k = 0; k < track.notes.size(); ++k) {
    const NoteEvent& note = track.notes[k];
    const int j = fg.bin_of(note.freq_hz);
    if (j < 0) {
      if (warnings) {
        warnings->push_back("rasterize: note " + std::to_string(k) + " of track '" +
                            track.track_id + "' at " + std::to_string(note.freq_hz) +
                            " Hz is outside the frequency grid; skipped");
      }
      continue;
    }

    // Closed interval start <= frame_time(i) <= end. The formula gives the
    // candidate range; the fixups pin boundary frames to the exact
    // frame_time comparison so the result matches a direct per-frame scan.
    Index lo = static_cast<Index>(std::ceil(note.start_sec / period));
    Index hi = static_cast<Index>(std::floor(note.end_sec / period));
    while (lo > 0 && tg.frame_time(lo - 1) >= note.start_sec) --lo;
    while (tg.frame_time(lo) < note.start_sec) ++lo;
    while (hi + 1 < n_frames && tg.frame_time(hi + 1) <= note.end_sec) ++hi;
    while (hi >= 0 && tg.frame_time(hi) > note.end_sec) --hi;

    lo = std::max<Index>(lo, 0);
    hi = std::min<Index>(hi, n_frames - 1);
    for (Index i = lo; i <= hi; ++i) out.data(i, j) = 1;
  }
  return out;
}

std::vector<NoteViolation> validate_notes(const NoteTrack& track) {
  std::vector<NoteViolation> violations;
  const auto& notes = track.notes;
  for (std::size_t a = 0; a < notes.size(); ++a) {
    if (!(notes[a].end_sec > notes[a].start_sec)) {
      violations.push_back({NoteViolation::Kind::non_positive_duration,
                            static_cast<int>(a), -1});
    }
    for (std::size_t b = a + 1; b < notes.size(); ++b) {
      // [start, end) intervals intersect
      if (notes[a].start_sec < notes[b].end_sec &&
          notes[b].start_sec < notes[a].end_sec) {
        violations.push_back({NoteViolation::Kind::overlap, static_cast<int>(a),
                              static_cast<int>(b)});
      }
    }
  }
  return violations;
}

Patch extract_patch(const SpectrogramStack& stack, const LabelMatrix& labels,
                    Index center, int context) {
  if (context <= 0) throw std::invalid_argument("extract_patch: context must be > 0");
  const Index frames = stack.frames();
  if (labels.frames() != frames)
    throw std::invalid_argument("extract_patch: stack and labels disagree on frame count");
  if (center < 0 || center >= frames)
    throw std::invalid_argument("extract_patch: center frame out of range");

  const Index bins = stack.bins();
  const Index width = 2 * static_cast<Index>(context) + 1;
  Patch p;
  p.center_index = center;
  p.mixture = Eigen::MatrixXf::Zero(bins, width);
  p.vocal = Eigen::MatrixXf::Zero(bins, width);
  p.labels = Eigen::MatrixXf::Zero(bins, width);

  for (Index t = 0; t < width; ++t) {
    const Index src = center - context + t;
    if (src < 0 || src >= frames) continue;  // zero padding
    p.mixture.col(t) = stack.mixture.row(src).transpose();
    p.vocal.col(t) = stack.vocal.row(src).transpose();
    p.labels.col(t) = labels.data.row(src).transpose().cast<float>();
  }
  return p;
}

}  // namespace notegate
