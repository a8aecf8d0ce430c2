// src/cqt.cpp

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

#include "notegate/cqt.hpp"

#include <cmath>
#include <numbers>

namespace notegate {

namespace {

constexpr double kGamma = 1000.0;

struct BinKernel {
  Eigen::VectorXf cos_part;  // hann(t) * cos(w t), t relative to window center
  Eigen::VectorXf sin_part;
  float scale = 0.0f;  // 2 / sum(hann), so a unit sine reads ~1
  int half = 0;        // window extends [-half, half] around the frame sample
};

BinKernel make_kernel(double freq, double sample_rate, double q_factor) {
  const int length = std::max(3, static_cast<int>(std::lround(q_factor * sample_rate / freq)));
  const int n = length | 1;  // odd, so the window centers exactly on the frame sample
  BinKernel k;
  k.half = n / 2;
  k.cos_part.resize(n);
  k.sin_part.resize(n);
  const double omega = 2.0 * std::numbers::pi * freq / sample_rate;
  double wsum = 0.0;
  for (int t = 0; t < n; ++t) {
    const double hann =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * t / (n - 1));
    const double phase = omega * (t - k.half);
    k.cos_part[t] = static_cast<float>(hann * std::cos(phase));
    k.sin_part[t] = static_cast<float>(hann * std::sin(phase));
    wsum += hann;
  }
  k.scale = static_cast<float>(2.0 / wsum);
  return k;
}

}  // namespace

Eigen::MatrixXf cqt(const Waveform& w, const FrequencyGrid& fg, const TimeGrid& tg) {
  if (w.samples.empty()) throw std::invalid_argument("cqt: empty waveform");
  if (w.sample_rate != tg.sample_rate)
    throw std::invalid_argument(
        "cqt: waveform sample rate " + std::to_string(w.sample_rate) +
        " does not match grid rate " + std::to_string(tg.sample_rate) +
        "; resample offline");

  const double q_factor = 1.0 / (std::exp2(1.0 / fg.bins_per_octave) - 1.0);
  const Index n_samples = static_cast<Index>(w.samples.size());
  const Index n_frames = tg.frame_count(n_samples);
  Eigen::MatrixXf out(n_frames, fg.n_bins);

  const Eigen::Map<const Eigen::VectorXf> x(w.samples.data(), n_samples);
  const double log_gamma_norm = std::log1p(kGamma);

  for (int j = 0; j < fg.n_bins; ++j) {
    const BinKernel k = make_kernel(fg.bin_freq(j), tg.sample_rate, q_factor);
    for (Index i = 0; i < n_frames; ++i) {
      const Index center = i * tg.hop;
      Index lo = center - k.half;
      Index hi = center + k.half;  // inclusive
      Index koff = 0;
      if (lo < 0) {
        koff = -lo;
        lo = 0;
      }
      if (hi > n_samples - 1) hi = n_samples - 1;
      const Index len = hi - lo + 1;
      float re = 0.0f, im = 0.0f;
      if (len > 0) {
        re = k.cos_part.segment(koff, len).dot(x.segment(lo, len));
        im = k.sin_part.segment(koff, len).dot(x.segment(lo, len));
      }
      const double mag = std::sqrt(double(re) * re + double(im) * im) * k.scale;
      const double compressed = std::log1p(mag * kGamma) / log_gamma_norm;
      out(i, j) = static_cast<float>(std::min(1.0, compressed));
    }
  }
  return out;
}

SpectrogramStack stack_channels(const Eigen::MatrixXf& mixture,
                                const std::optional<Eigen::MatrixXf>& vocal) {
  SpectrogramStack s;
  s.mixture = mixture;
  if (vocal) {
    if (vocal->rows() != mixture.rows() || vocal->cols() != mixture.cols())
      throw std::invalid_argument("stack_channels: mixture and vocal shapes differ");
    s.vocal = *vocal;
    s.vocal_is_proxy = false;
  } else {
    s.vocal = mixture;
    s.vocal_is_proxy = true;
  }
  return s;
}

std::vector<double> frame_energy(const SpectrogramStack& stack, int channel) {
  const Eigen::MatrixXf& m = stack.channel(channel);  // throws on bad index
  std::vector<double> energy(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i)
    energy[static_cast<std::size_t>(i)] = m.row(i).cast<double>().sum();
  return energy;
}

}  // namespace notegate
