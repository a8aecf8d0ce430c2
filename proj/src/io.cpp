// src/io.cpp

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

#include "notegate/io.hpp"

#include "notegate/util.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "notegate file formats assume a little-endian host");

namespace notegate {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for reading: " + path.string());
  return f;
}

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f, const std::filesystem::path& path) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw DataError("truncated file: " + path.string());
  return v;
}

void read_bytes(std::ifstream& f, void* dst, std::size_t n,
                const std::filesystem::path& path) {
  f.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (!f) throw DataError("truncated file: " + path.string());
}

constexpr char kNgmxMagic[4] = {'N', 'G', 'M', 'X'};
constexpr std::uint16_t kNgmxVersion = 1;

}  // namespace

std::size_t NgmxTensor::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return dims.empty() ? 0 : n;
}

void write_ngmx(const std::filesystem::path& path, const NgmxTensor& tensor) {
  if (tensor.dims.empty() || tensor.dims.size() > 255)
    throw std::invalid_argument("write_ngmx: ndim must be in [1, 255]");
  const std::size_t n = tensor.element_count();
  const bool is_f32 = tensor.dtype == NgmxTensor::Dtype::f32;
  if ((is_f32 ? tensor.f32.size() : tensor.u8.size()) != n)
    throw std::invalid_argument("write_ngmx: payload size does not match dims");

  auto f = open_out(path);
  f.write(kNgmxMagic, 4);
  write_pod(f, kNgmxVersion);
  write_pod(f, static_cast<std::uint8_t>(tensor.dtype));
  write_pod(f, static_cast<std::uint8_t>(tensor.dims.size()));
  for (std::uint32_t d : tensor.dims) write_pod(f, d);
  if (is_f32)
    f.write(reinterpret_cast<const char*>(tensor.f32.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
  else
    f.write(reinterpret_cast<const char*>(tensor.u8.data()),
            static_cast<std::streamsize>(n));
  if (!f) throw DataError("write failed: " + path.string());
}

NgmxTensor read_ngmx(const std::filesystem::path& path) {
  auto f = open_in(path);
  char magic[4];
  read_bytes(f, magic, 4, path);
  if (std::memcmp(magic, kNgmxMagic, 4) != 0)
    throw DataError("not an NGMX file (bad magic): " + path.string());
  const auto version = read_pod<std::uint16_t>(f, path);
  if (version != kNgmxVersion)
    throw DataError("unsupported NGMX version " + std::to_string(version) + ": " +
                    path.string());
  const auto dtype = read_pod<std::uint8_t>(f, path);
  if (dtype > 1)
    throw DataError("unknown NGMX dtype " + std::to_string(dtype) + ": " +
                    path.string());
  const auto ndim = read_pod<std::uint8_t>(f, path);
  if (ndim == 0) throw DataError("NGMX ndim = 0: " + path.string());

  NgmxTensor t;
  t.dtype = static_cast<NgmxTensor::Dtype>(dtype);
  t.dims.resize(ndim);
  for (auto& d : t.dims) d = read_pod<std::uint32_t>(f, path);
  const std::size_t n = t.element_count();
  if (t.dtype == NgmxTensor::Dtype::f32) {
    t.f32.resize(n);
    read_bytes(f, t.f32.data(), n * sizeof(float), path);
  } else {
    t.u8.resize(n);
    read_bytes(f, t.u8.data(), n, path);
  }
  return t;
}

namespace {

template <typename Derived, typename Out>
void flatten_row_major(const Eigen::MatrixBase<Derived>& m, std::vector<Out>& out) {
  out.resize(static_cast<std::size_t>(m.rows() * m.cols()));
  std::size_t k = 0;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) out[k++] = static_cast<Out>(m(r, c));
}

void expect_dims(const NgmxTensor& t, std::size_t ndim, NgmxTensor::Dtype dtype,
                 const std::filesystem::path& path) {
  if (t.dims.size() != ndim)
    throw DataError("NGMX rank mismatch (want " + std::to_string(ndim) + ", got " +
                    std::to_string(t.dims.size()) + "): " + path.string());
  if (t.dtype != dtype) throw DataError("NGMX dtype mismatch: " + path.string());
}

template <typename Scalar>
MatrixX<Scalar> to_matrix(const std::vector<Scalar>& flat, Index rows, Index cols) {
  MatrixX<Scalar> m(rows, cols);
  std::size_t k = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = flat[k++];
  return m;
}

}  // namespace

void write_ngmx_matrix(const std::filesystem::path& path, const Eigen::MatrixXf& m) {
  NgmxTensor t;
  t.dtype = NgmxTensor::Dtype::f32;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  flatten_row_major(m, t.f32);
  write_ngmx(path, t);
}

void write_ngmx_matrix(const std::filesystem::path& path,
                       const MatrixX<std::uint8_t>& m) {
  NgmxTensor t;
  t.dtype = NgmxTensor::Dtype::u8;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  flatten_row_major(m, t.u8);
  write_ngmx(path, t);
}

void write_ngmx_vector(const std::filesystem::path& path, const std::vector<float>& v) {
  NgmxTensor t;
  t.dtype = NgmxTensor::Dtype::f32;
  t.dims = {static_cast<std::uint32_t>(v.size())};
  t.f32 = v;
  write_ngmx(path, t);
}

void write_ngmx_vector(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& v) {
  NgmxTensor t;
  t.dtype = NgmxTensor::Dtype::u8;
  t.dims = {static_cast<std::uint32_t>(v.size())};
  t.u8 = v;
  write_ngmx(path, t);
}

void write_ngmx_stack(const std::filesystem::path& path, const SpectrogramStack& s) {
  if (s.vocal.rows() != s.mixture.rows() || s.vocal.cols() != s.mixture.cols())
    throw std::invalid_argument("write_ngmx_stack: channel shapes differ");
  NgmxTensor t;
  t.dtype = NgmxTensor::Dtype::f32;
  t.dims = {static_cast<std::uint32_t>(s.frames()),
            static_cast<std::uint32_t>(s.bins()), 2u};
  t.f32.resize(static_cast<std::size_t>(s.frames() * s.bins() * 2));
  std::size_t k = 0;
  for (Index i = 0; i < s.frames(); ++i)
    for (Index j = 0; j < s.bins(); ++j) {
      t.f32[k++] = s.mixture(i, j);
      t.f32[k++] = s.vocal(i, j);
    }
  write_ngmx(path, t);
}

Eigen::MatrixXf read_ngmx_matrix_f32(const std::filesystem::path& path) {
  NgmxTensor t = read_ngmx(path);
  expect_dims(t, 2, NgmxTensor::Dtype::f32, path);
  return to_matrix<float>(t.f32, t.dims[0], t.dims[1]);
}

MatrixX<std::uint8_t> read_ngmx_matrix_u8(const std::filesystem::path& path) {
  NgmxTensor t = read_ngmx(path);
  expect_dims(t, 2, NgmxTensor::Dtype::u8, path);
  return to_matrix<std::uint8_t>(t.u8, t.dims[0], t.dims[1]);
}

std::vector<float> read_ngmx_vector_f32(const std::filesystem::path& path) {
  NgmxTensor t = read_ngmx(path);
  expect_dims(t, 1, NgmxTensor::Dtype::f32, path);
  return std::move(t.f32);
}

std::vector<std::uint8_t> read_ngmx_vector_u8(const std::filesystem::path& path) {
  NgmxTensor t = read_ngmx(path);
  expect_dims(t, 1, NgmxTensor::Dtype::u8, path);
  return std::move(t.u8);
}

SpectrogramStack read_ngmx_stack(const std::filesystem::path& path) {
  NgmxTensor t = read_ngmx(path);
  expect_dims(t, 3, NgmxTensor::Dtype::f32, path);
  if (t.dims[2] != 2)
    throw DataError("NGMX stack must have 2 channels: " + path.string());
  SpectrogramStack s;
  const Index frames = t.dims[0], bins = t.dims[1];
  s.mixture.resize(frames, bins);
  s.vocal.resize(frames, bins);
  std::size_t k = 0;
  for (Index i = 0; i < frames; ++i)
    for (Index j = 0; j < bins; ++j) {
      s.mixture(i, j) = t.f32[k++];
      s.vocal(i, j) = t.f32[k++];
    }
  s.vocal_is_proxy =
      s.mixture.size() == 0 || (s.mixture.array() == s.vocal.array()).all();
  return s;
}

// ---------------------------------------------------------------------------
// WAV
// ---------------------------------------------------------------------------

namespace {

struct WavFmt {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  auto f = open_in(path);
  char tag[4];
  read_bytes(f, tag, 4, path);
  if (std::memcmp(tag, "RIFF", 4) != 0) throw DataError("not a RIFF file: " + path.string());
  (void)read_pod<std::uint32_t>(f, path);  // riff size
  read_bytes(f, tag, 4, path);
  if (std::memcmp(tag, "WAVE", 4) != 0) throw DataError("not a WAVE file: " + path.string());

  WavFmt fmt;
  bool have_fmt = false;
  Waveform w;
  while (f.peek() != EOF) {
    read_bytes(f, tag, 4, path);
    const auto chunk_size = read_pod<std::uint32_t>(f, path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      fmt.format = read_pod<std::uint16_t>(f, path);
      fmt.channels = read_pod<std::uint16_t>(f, path);
      fmt.sample_rate = read_pod<std::uint32_t>(f, path);
      (void)read_pod<std::uint32_t>(f, path);  // byte rate
      (void)read_pod<std::uint16_t>(f, path);  // block align
      fmt.bits = read_pod<std::uint16_t>(f, path);
      if (chunk_size > 16) f.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw DataError("WAV data chunk before fmt: " + path.string());
      if (fmt.channels != 1)
        throw DataError("WAV must be mono (got " + std::to_string(fmt.channels) +
                        " channels): " + path.string());
      w.sample_rate = fmt.sample_rate;
      if (fmt.format == 1 && fmt.bits == 16) {
        const std::size_t n = chunk_size / 2;
        std::vector<std::int16_t> raw(n);
        read_bytes(f, raw.data(), chunk_size, path);
        w.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) w.samples[i] = raw[i] / 32768.0f;
      } else if (fmt.format == 3 && fmt.bits == 32) {
        const std::size_t n = chunk_size / 4;
        w.samples.resize(n);
        read_bytes(f, w.samples.data(), chunk_size, path);
      } else {
        throw DataError("WAV must be PCM16 or float32: " + path.string());
      }
      return w;
    } else {
      f.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
      if (!f) throw DataError("truncated file: " + path.string());
    }
  }
  throw DataError("WAV has no data chunk: " + path.string());
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  auto f = open_out(path);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 4);
  const std::uint32_t rate = static_cast<std::uint32_t>(w.sample_rate);
  f.write("RIFF", 4);
  write_pod(f, static_cast<std::uint32_t>(36 + data_bytes));
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  write_pod(f, static_cast<std::uint32_t>(16));
  write_pod(f, static_cast<std::uint16_t>(3));  // IEEE float
  write_pod(f, static_cast<std::uint16_t>(1));  // mono
  write_pod(f, rate);
  write_pod(f, static_cast<std::uint32_t>(rate * 4));
  write_pod(f, static_cast<std::uint16_t>(4));
  write_pod(f, static_cast<std::uint16_t>(32));
  f.write("data", 4);
  write_pod(f, data_bytes);
  f.write(reinterpret_cast<const char*>(w.samples.data()), data_bytes);
  if (!f) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, const std::filesystem::path& path,
                    std::size_t line_no) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw DataError("bad number '" + s + "' at " + path.string() + ":" +
                    std::to_string(line_no));
  return v;
}

void expect_header(std::ifstream& f, const std::string& want,
                   const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(f, line)) throw DataError("empty CSV: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != want)
    throw DataError("expected header '" + want + "' in " + path.string() + ", got '" +
                    line + "'");
}

}  // namespace

NoteTrack read_notes_csv(const std::filesystem::path& path) {
  auto f = open_in(path);
  expect_header(f, "start_sec,end_sec,freq_hz", path);
  NoteTrack track;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3)
      throw DataError("expected 3 fields at " + path.string() + ":" +
                      std::to_string(line_no));
    NoteEvent n;
    n.start_sec = parse_double(fields[0], path, line_no);
    n.end_sec = parse_double(fields[1], path, line_no);
    n.freq_hz = parse_double(fields[2], path, line_no);
    if (!(n.freq_hz > 0.0) || !std::isfinite(n.freq_hz))
      throw DataError("non-positive note frequency at " + path.string() + ":" +
                      std::to_string(line_no));
    if (n.start_sec < 0.0)
      throw DataError("negative note start at " + path.string() + ":" +
                      std::to_string(line_no));
    track.notes.push_back(n);
  }
  track.sort_by_start();
  return track;
}

void write_notes_csv(const std::filesystem::path& path, const NoteTrack& track) {
  auto f = open_out(path);
  f << "start_sec,end_sec,freq_hz\n";
  for (const auto& n : track.notes)
    f << format_double(n.start_sec) << ',' << format_double(n.end_sec) << ','
      << format_double(n.freq_hz) << '\n';
  if (!f) throw DataError("write failed: " + path.string());
}

F0Csv read_f0_csv(const std::filesystem::path& path) {
  auto f = open_in(path);
  expect_header(f, "time_sec,f0_hz,voicing", path);
  F0Csv seq;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3)
      throw DataError("expected 3 fields at " + path.string() + ":" +
                      std::to_string(line_no));
    seq.time_sec.push_back(parse_double(fields[0], path, line_no));
    seq.f0_hz.push_back(parse_double(fields[1], path, line_no));
    seq.voicing.push_back(parse_double(fields[2], path, line_no));
  }
  return seq;
}

void write_f0_csv(const std::filesystem::path& path, const F0Csv& seq) {
  if (seq.f0_hz.size() != seq.time_sec.size() ||
      seq.voicing.size() != seq.time_sec.size())
    throw std::invalid_argument("write_f0_csv: column lengths differ");
  auto f = open_out(path);
  f << "time_sec,f0_hz,voicing\n";
  for (std::size_t i = 0; i < seq.time_sec.size(); ++i)
    f << format_double(seq.time_sec[i]) << ',' << format_double(seq.f0_hz[i]) << ','
      << format_double(seq.voicing[i]) << '\n';
  if (!f) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// logging (declared in util.hpp)
// ---------------------------------------------------------------------------

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("NOTEGATE_LOG");
    if (!env) return LogLevel::info;
    const std::string v(env);
    if (v == "quiet" || v == "0") return LogLevel::quiet;
    if (v == "debug" || v == "2") return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) std::fprintf(stderr, "[notegate] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug)
    std::fprintf(stderr, "[notegate:debug] %s\n", msg.c_str());
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: empty input");
  if (q < 0.0) q = 0.0;
  if (q > 1.0) q = 1.0;
  std::sort(values.begin(), values.end());
  const std::size_t rank =
      q <= 0.0 ? 1
               : static_cast<std::size_t>(
                     std::ceil(q * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

}  // namespace notegate
