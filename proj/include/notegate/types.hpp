// notegate/types.hpp

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

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace notegate {

template <typename T>
using MatrixX = Eigen::MatrixX<T>;
template <typename T>
using VectorX = Eigen::VectorX<T>;
template <typename T>
using RowVectorX = Eigen::RowVectorX<T>;

using Index = Eigen::Index;

/// One annotated note: [start, end) in seconds, fundamental frequency in Hz.
struct NoteEvent {
  double start_sec = 0.0;
  double end_sec = 0.0;
  double freq_hz = 0.0;

  double duration() const { return end_sec - start_sec; }
};

/// A track's note annotations, sorted by start time. A valid track has no two
/// notes with overlapping [start, end) intervals; see validate_notes().
struct NoteTrack {
  std::string track_id;
  std::vector<NoteEvent> notes;

  void sort_by_start();
};

/// Frame clock shared by spectrograms and label matrices. Frame i sits at
/// timestamp frame_time(i) = i * hop / sample_rate.
struct TimeGrid {
  double sample_rate = 22050.0;
  int hop = 256;

  double frame_period() const { return hop / sample_rate; }
  double frame_time(Index i) const { return frame_period() * static_cast<double>(i); }
  Index frame_count(Index n_samples) const {
    return (n_samples + hop - 1) / hop;
  }
};

/// Geometrically spaced frequency bins, one per semitone by default.
/// bin_freq(-1) extrapolates one bin below fmin and is the lower boundary of
/// bin 0 when mapping note frequencies to bins.
struct FrequencyGrid {
  int n_bins = 72;
  int bins_per_octave = 12;
  double fmin_hz = 65.406;  // C2

  double bin_freq(int j) const {
    return fmin_hz * std::exp2(static_cast<double>(j) / bins_per_octave);
  }

  /// Bin j with bin_freq(j-1) < f <= bin_freq(j), or -1 when f is outside
  /// (bin_freq(-1), bin_freq(n_bins-1)]. Boundary semantics are exact with
  /// respect to bin_freq(), so f == bin_freq(5) maps to bin 5.
  int bin_of(double f) const {
    if (!(f > 0.0) || !std::isfinite(f)) return -1;
    if (!(f > bin_freq(-1)) || !(f <= bin_freq(n_bins - 1))) return -1;
    int j = static_cast<int>(
        std::lround(bins_per_octave * std::log2(f / fmin_hz)));
    if (j < 0) j = 0;
    if (j > n_bins - 1) j = n_bins - 1;
    while (j > 0 && f <= bin_freq(j - 1)) --j;
    while (j < n_bins - 1 && f > bin_freq(j)) ++j;
    return j;
  }
};

/// Binary time-frequency rasterization of a note track: data(i, j) == 1 iff
/// some note covers frame i and maps to bin j. Rows are frames.
struct LabelMatrix {
  MatrixX<std::uint8_t> data;  // n_frames x n_bins

  Index frames() const { return data.rows(); }
  Index bins() const { return data.cols(); }
};

/// Raw audio. The pipeline defaults require 22050 Hz mono.
struct Waveform {
  std::vector<float> samples;
  double sample_rate = 22050.0;
};

/// Two aligned CQT channels (frames x bins each), values in [0, 1].
/// When no vocal stem exists, the vocal channel duplicates the mixture and
/// vocal_is_proxy is set.
struct SpectrogramStack {
  Eigen::MatrixXf mixture;  // frames x bins
  Eigen::MatrixXf vocal;    // frames x bins
  bool vocal_is_proxy = false;

  Index frames() const { return mixture.rows(); }
  Index bins() const { return mixture.cols(); }

  const Eigen::MatrixXf& channel(int c) const {
    if (c == 0) return mixture;
    if (c == 1) return vocal;
    throw std::invalid_argument("SpectrogramStack::channel: index out of range");
  }
};

/// Per-frame, per-bin likelihood that a pitch is active, in [0, 1].
struct SalienceMatrix {
  Eigen::MatrixXf data;  // frames x bins

  Index frames() const { return data.rows(); }
  Index bins() const { return data.cols(); }
};

/// One scoring window: three bins x width channel planes (mixture CQT, vocal
/// CQT, label slice) centered on a frame, zero-padded at track boundaries.
struct Patch {
  Eigen::MatrixXf mixture;  // bins x width
  Eigen::MatrixXf vocal;    // bins x width
  Eigen::MatrixXf labels;   // bins x width, entries in {0, 1}
  Index center_index = 0;

  Index bins() const { return mixture.rows(); }
  Index width() const { return mixture.cols(); }
};

/// A labeled training unit for the error detector: z = 0 for likely correct
/// center frames, z = 1 for deformed ones.
struct PatchExample {
  Patch patch;
  int z = 0;
  std::string track_id;
};

}  // namespace notegate
