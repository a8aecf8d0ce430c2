// notegate/io.hpp

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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace notegate {

// ---------------------------------------------------------------------------
// NGMX: binary tensor container.
//   magic "NGMX", u16 version = 1, u8 dtype (0 = float32, 1 = uint8),
//   u8 ndim, ndim x u32 dims, then row-major little-endian payload.
// ---------------------------------------------------------------------------

struct NgmxTensor {
  enum class Dtype : std::uint8_t { f32 = 0, u8 = 1 };
  Dtype dtype = Dtype::f32;
  std::vector<std::uint32_t> dims;
  std::vector<float> f32;        // populated when dtype == f32
  std::vector<std::uint8_t> u8;  // populated when dtype == u8

  std::size_t element_count() const;
};

void write_ngmx(const std::filesystem::path& path, const NgmxTensor& tensor);
NgmxTensor read_ngmx(const std::filesystem::path& path);

// Typed convenience wrappers. Matrices serialize with dims {rows, cols};
// Eigen's column-major storage is re-ordered to the row-major payload.
void write_ngmx_matrix(const std::filesystem::path& path, const Eigen::MatrixXf& m);
void write_ngmx_matrix(const std::filesystem::path& path,
                       const MatrixX<std::uint8_t>& m);
void write_ngmx_vector(const std::filesystem::path& path,
                       const std::vector<float>& v);
void write_ngmx_vector(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& v);
/// Stack serializes as dims {frames, bins, 2}.
void write_ngmx_stack(const std::filesystem::path& path, const SpectrogramStack& s);

Eigen::MatrixXf read_ngmx_matrix_f32(const std::filesystem::path& path);
MatrixX<std::uint8_t> read_ngmx_matrix_u8(const std::filesystem::path& path);
std::vector<float> read_ngmx_vector_f32(const std::filesystem::path& path);
std::vector<std::uint8_t> read_ngmx_vector_u8(const std::filesystem::path& path);
/// vocal_is_proxy is recovered as "channels identical".
SpectrogramStack read_ngmx_stack(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// WAV: mono, PCM16 or IEEE float32.
// ---------------------------------------------------------------------------

Waveform read_wav(const std::filesystem::path& path);
/// Writes IEEE float32 mono.
void write_wav(const std::filesystem::path& path, const Waveform& w);

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Note events: header `start_sec,end_sec,freq_hz`, one note per row.
/// Reading sorts by start time; the track_id is the caller's to assign.
NoteTrack read_notes_csv(const std::filesystem::path& path);
void write_notes_csv(const std::filesystem::path& path, const NoteTrack& track);

/// Frame f0 sequences: header `time_sec,f0_hz,voicing`.
struct F0Csv {
  std::vector<double> time_sec;
  std::vector<double> f0_hz;
  std::vector<double> voicing;
};
F0Csv read_f0_csv(const std::filesystem::path& path);
void write_f0_csv(const std::filesystem::path& path, const F0Csv& seq);

/// Shortest round-trip decimal rendering, used for all deterministic
/// text artifacts.
std::string format_double(double v);

}  // namespace notegate
