// src/select.cpp

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

#include "notegate/select.hpp"

#include "notegate/util.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace notegate {

SelectionThresholds SelectionThresholds::train_profile() {
  SelectionThresholds t;
  t.profile = Profile::train;
  t.kl_lo = 0.9;
  t.kl_hi = 0.999;
  t.kp_lo = 0.7;
  t.kp_hi = 0.85;
  return t;
}

SelectionThresholds SelectionThresholds::test_profile() {
  SelectionThresholds t;
  t.profile = Profile::test;
  t.kl_lo = 0.999;
  t.kl_hi = 1.0;
  t.kp_lo = 0.85;
  t.kp_hi = 1.0;
  return t;
}

double local_agreement(const Eigen::Ref<const Eigen::RowVectorX<std::uint8_t>>& label_row,
                       const Eigen::Ref<const Eigen::RowVectorXf>& salience_row) {
  if (label_row.size() != salience_row.size())
    throw std::invalid_argument("local_agreement: length mismatch");
  double best = 0.0;
  for (Index j = 0; j < label_row.size(); ++j)
    best = std::max(best, static_cast<double>(label_row[j]) * salience_row[j]);
  return best;
}

std::vector<double> patch_agreement(const std::vector<double>& local, int k) {
  if (k < 1 || k % 2 == 0)
    throw std::invalid_argument("patch_agreement: window must be odd and >= 1");
  const int n = static_cast<int>(local.size());
  const int half = k / 2;
  std::vector<double> out(local.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    double sum = 0.0;
    for (int t = lo; t <= hi; ++t) sum += local[static_cast<std::size_t>(t)];
    out[static_cast<std::size_t>(i)] = sum / (hi - lo + 1);
  }
  return out;
}

namespace {

std::vector<double> local_agreement_series(const LabelMatrix& labels,
                                           const SalienceMatrix& salience) {
  if (labels.frames() != salience.frames() || labels.bins() != salience.bins())
    throw std::invalid_argument("selection: label/salience shape mismatch");
  std::vector<double> kl(static_cast<std::size_t>(labels.frames()));
  for (Index i = 0; i < labels.frames(); ++i)
    kl[static_cast<std::size_t>(i)] =
        local_agreement(labels.data.row(i), salience.data.row(i));
  return kl;
}

bool in_bounds(double v, double lo, double hi) { return v > lo && v <= hi; }

}  // namespace

std::vector<Index> select_likely_correct(const LabelMatrix& labels,
                                         const SalienceMatrix& salience,
                                         const SelectionThresholds& th, int context) {
  const std::vector<double> kl = local_agreement_series(labels, salience);
  const std::vector<double> kp = patch_agreement(kl, th.moving_avg_width);
  std::vector<Index> selected;
  const Index frames = labels.frames();
  for (Index i = context; i < frames - context; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (in_bounds(kl[u], th.kl_lo, th.kl_hi) && in_bounds(kp[u], th.kp_lo, th.kp_hi))
      selected.push_back(i);
  }
  return selected;
}

std::vector<Index> select_silence_positives(const LabelMatrix& labels,
                                            const std::vector<double>& energy,
                                            const SelectionThresholds& th, int context,
                                            std::vector<std::string>* warnings) {
  const Index frames = labels.frames();
  if (static_cast<Index>(energy.size()) != frames)
    throw std::invalid_argument("select_silence_positives: energy length mismatch");
  if (frames < th.silence_window) {
    if (warnings)
      warnings->push_back("select_silence_positives: track of " +
                          std::to_string(frames) + " frames is shorter than the " +
                          std::to_string(th.silence_window) + "-frame silence window");
    return {};
  }

  const double energy_cap = percentile(energy, th.silence_quantile);
  const Index half = th.silence_window / 2;

  // prefix[i] = number of annotated frames before i
  std::vector<Index> prefix(static_cast<std::size_t>(frames) + 1, 0);
  for (Index i = 0; i < frames; ++i)
    prefix[static_cast<std::size_t>(i) + 1] =
        prefix[static_cast<std::size_t>(i)] +
        ((labels.data.row(i).array() != 0).any() ? 1 : 0);

  std::vector<Index> selected;
  const Index lo = std::max<Index>(context, half);
  const Index hi = std::min<Index>(frames - 1 - context, frames - 1 - half);
  for (Index i = lo; i <= hi; ++i) {
    const Index annotated =
        prefix[static_cast<std::size_t>(i + half) + 1] - prefix[static_cast<std::size_t>(i - half)];
    if (annotated == 0 && energy[static_cast<std::size_t>(i)] <= energy_cap)
      selected.push_back(i);
  }
  return selected;
}

SalienceMatrix pseudo_salience(const SpectrogramStack& stack) {
  SalienceMatrix s;
  s.data.resize(stack.frames(), stack.bins());
  for (Index i = 0; i < stack.frames(); ++i) {
    const float peak = stack.vocal.row(i).maxCoeff();
    if (peak > 0.0f)
      s.data.row(i) = stack.vocal.row(i) / peak;
    else
      s.data.row(i).setZero();
  }
  return s;
}

namespace {

// Uniform down-sample to `target` elements, preserving input order.
void downsample(std::vector<PatchExample>& v, std::size_t target, Rng& rng) {
  if (v.size() <= target) return;
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(idx);
  idx.resize(target);
  std::sort(idx.begin(), idx.end());
  std::vector<PatchExample> kept;
  kept.reserve(target);
  for (std::size_t i : idx) kept.push_back(std::move(v[i]));
  v = std::move(kept);
}

}  // namespace

TrainingSet build_training_set(std::vector<PatchExample> positives,
                               std::vector<PatchExample> negatives,
                               double positives_per_negative, double holdout_fraction,
                               std::uint64_t seed) {
  if (positives.empty())
    throw DataError(
        "build_training_set: no positive examples; agreement/silence selection "
        "produced nothing");
  if (negatives.empty())
    throw DataError(
        "build_training_set: no negative examples; deformation sampling produced "
        "nothing");
  if (!(positives_per_negative > 0.0))
    throw std::invalid_argument("build_training_set: ratio must be > 0");
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0)
    throw std::invalid_argument("build_training_set: holdout fraction must be in [0,1)");

  Rng rng(Rng::seed_mix(seed, 0x62616cULL));

  // Balance: with ratio r = positives per negative, the feasible pair is
  // n_neg = min(|neg|, |pos|/r), n_pos = min(|pos|, r * n_neg).
  const double r = positives_per_negative;
  std::size_t n_neg = std::min<std::size_t>(
      negatives.size(),
      static_cast<std::size_t>(std::floor(static_cast<double>(positives.size()) / r + 1e-9)));
  n_neg = std::max<std::size_t>(n_neg, 1);
  std::size_t n_pos = std::min<std::size_t>(
      positives.size(),
      static_cast<std::size_t>(std::floor(r * static_cast<double>(n_neg) + 1e-9)));
  n_pos = std::max<std::size_t>(n_pos, 1);
  downsample(positives, n_pos, rng);
  downsample(negatives, n_neg, rng);

  // Track-level split: examples of one track never straddle the boundary.
  std::set<std::string> track_set;
  for (const auto& e : positives) track_set.insert(e.track_id);
  for (const auto& e : negatives) track_set.insert(e.track_id);
  std::vector<std::string> tracks(track_set.begin(), track_set.end());
  rng.shuffle(tracks);

  std::size_t holdout_tracks = static_cast<std::size_t>(
      std::ceil(holdout_fraction * static_cast<double>(tracks.size()) - 1e-9));
  if (holdout_fraction > 0.0 && tracks.size() >= 2)
    holdout_tracks = std::max<std::size_t>(holdout_tracks, 1);
  holdout_tracks = std::min(holdout_tracks, tracks.size() > 0 ? tracks.size() - 1 : 0);

  std::set<std::string> holdout_ids(tracks.begin(),
                                    tracks.begin() + static_cast<std::ptrdiff_t>(holdout_tracks));

  TrainingSet out;
  auto route = [&](std::vector<PatchExample>& src) {
    for (auto& e : src) {
      if (holdout_ids.count(e.track_id))
        out.holdout.push_back(std::move(e));
      else
        out.train.push_back(std::move(e));
    }
  };
  route(positives);
  route(negatives);

  Rng shuffle_rng(Rng::seed_mix(seed, 0x73687566ULL));
  shuffle_rng.shuffle(out.train);
  shuffle_rng.shuffle(out.holdout);
  return out;
}

}  // namespace notegate
