// src/deform.cpp

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

#include "notegate/deform.hpp"

#include "notegate/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace notegate {

using nlohmann::json;

void DeformationConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(p_onset_shift) || !prob(p_offset_shift) || !prob(p_pitch_shift) ||
      !prob(p_delete) || !prob(p_insert))
    throw std::invalid_argument("DeformationConfig: probabilities must be in [0,1]");
  if (p_onset_shift + p_offset_shift + p_pitch_shift + p_delete > 1.0 + 1e-12)
    throw std::invalid_argument(
        "DeformationConfig: per-note probabilities must sum to <= 1");
  if (!(shift_min_sec > 0.0) || !(shift_max_sec >= shift_min_sec))
    throw std::invalid_argument("DeformationConfig: bad shift range");
  if (pitch_min_semitones < 1 || pitch_max_semitones < pitch_min_semitones)
    throw std::invalid_argument("DeformationConfig: bad pitch-shift range");
  if (!(min_duration_sec > 0.0))
    throw std::invalid_argument("DeformationConfig: min_duration must be > 0");
  if (passes < 1) throw std::invalid_argument("DeformationConfig: passes must be >= 1");
}

DeformationConfig deformation_config_from_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config: " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw DataError("bad JSON in " + path.string() + ": " + e.what());
  }
  DeformationConfig d;
  DeformationConfig c;
  c.p_onset_shift = j.value("p_onset_shift", d.p_onset_shift);
  c.p_offset_shift = j.value("p_offset_shift", d.p_offset_shift);
  c.p_pitch_shift = j.value("p_pitch_shift", d.p_pitch_shift);
  c.p_delete = j.value("p_delete", d.p_delete);
  c.p_insert = j.value("p_insert", d.p_insert);
  c.shift_min_sec = j.value("shift_min_sec", d.shift_min_sec);
  c.shift_max_sec = j.value("shift_max_sec", d.shift_max_sec);
  c.pitch_min_semitones = j.value("pitch_min_semitones", d.pitch_min_semitones);
  c.pitch_max_semitones = j.value("pitch_max_semitones", d.pitch_max_semitones);
  c.min_duration_sec = j.value("min_duration_sec", d.min_duration_sec);
  c.rng_seed = j.value("rng_seed", d.rng_seed);
  c.passes = j.value("passes", d.passes);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return c;
}

std::string deformation_config_to_json(const DeformationConfig& c) {
  json j;
  j["p_onset_shift"] = c.p_onset_shift;
  j["p_offset_shift"] = c.p_offset_shift;
  j["p_pitch_shift"] = c.p_pitch_shift;
  j["p_delete"] = c.p_delete;
  j["p_insert"] = c.p_insert;
  j["shift_min_sec"] = c.shift_min_sec;
  j["shift_max_sec"] = c.shift_max_sec;
  j["pitch_min_semitones"] = c.pitch_min_semitones;
  j["pitch_max_semitones"] = c.pitch_max_semitones;
  j["min_duration_sec"] = c.min_duration_sec;
  j["rng_seed"] = c.rng_seed;
  j["passes"] = c.passes;
  return j.dump(2);
}

const char* to_string(DeformKind k) {
  switch (k) {
    case DeformKind::onset: return "onset";
    case DeformKind::offset: return "offset";
    case DeformKind::pitch: return "pitch";
    case DeformKind::erase: return "delete";
    case DeformKind::insert: return "insert";
  }
  return "?";
}

namespace {

double semitone_ratio(double semitones) { return std::exp2(semitones / 12.0); }

}  // namespace

DeformResult deform_track(const NoteTrack& input, const DeformationConfig& cfg) {
  cfg.validate();
  if (!validate_notes(input).empty())
    throw std::invalid_argument("deform_track: input track '" + input.track_id +
                                "' is not valid");

  Rng rng(cfg.rng_seed);
  const auto& orig = input.notes;
  const std::size_t n = orig.size();

  std::vector<NoteEvent> working = orig;
  std::vector<bool> alive(n, true);
  std::vector<DeformationRecord> records;

  const double c_onset = cfg.p_onset_shift;
  const double c_offset = c_onset + cfg.p_offset_shift;
  const double c_pitch = c_offset + cfg.p_pitch_shift;
  const double c_delete = c_pitch + cfg.p_delete;

  // Grid bounds for keeping shifted/inserted pitches representable. Deform
  // does not own a FrequencyGrid; the default 6-octave grid is the pipeline
  // invariant and pitch clamping only needs its outer edges.
  const FrequencyGrid fg;
  const double f_floor = fg.bin_freq(-1);
  const double f_ceil = fg.bin_freq(fg.n_bins - 1);

  double prev_end = 0.0;  // end of the last surviving, already-processed note
  for (std::size_t k = 0; k < n; ++k) {
    const double u = rng.uniform();
    NoteEvent& note = working[k];
    const double dur_floor = std::min(cfg.min_duration_sec, orig[k].duration());

    if (u < c_onset) {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double drawn = sign * rng.uniform(cfg.shift_min_sec, cfg.shift_max_sec);
      const double lo = std::max(prev_end, 0.0);
      const double hi = note.end_sec - dur_floor;
      const double new_start = std::clamp(note.start_sec + drawn, lo, hi);
      const double realized = new_start - note.start_sec;
      if (realized != 0.0) {
        note.start_sec = new_start;
        records.push_back({DeformKind::onset, static_cast<int>(k), realized, {}});
      }
    } else if (u < c_offset) {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double drawn = sign * rng.uniform(cfg.shift_min_sec, cfg.shift_max_sec);
      const double lo = note.start_sec + dur_floor;
      const double hi = k + 1 < n ? working[k + 1].start_sec
                                  : std::numeric_limits<double>::infinity();
      const double new_end = std::clamp(note.end_sec + drawn, lo, hi);
      const double realized = new_end - note.end_sec;
      if (realized != 0.0) {
        note.end_sec = new_end;
        records.push_back({DeformKind::offset, static_cast<int>(k), realized, {}});
      }
    } else if (u < c_pitch) {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      double steps =
          sign * static_cast<double>(
                     rng.uniform_int(cfg.pitch_min_semitones, cfg.pitch_max_semitones));
      double new_f = note.freq_hz * semitone_ratio(steps);
      if (new_f <= f_floor || new_f > f_ceil) {
        steps = -steps;  // mirror a shift that would leave the grid
        new_f = note.freq_hz * semitone_ratio(steps);
      }
      if (new_f > f_floor && new_f <= f_ceil) {
        note.freq_hz = new_f;
        records.push_back({DeformKind::pitch, static_cast<int>(k), steps, {}});
      }
    } else if (u < c_delete) {
      alive[k] = false;
      records.push_back({DeformKind::erase, static_cast<int>(k), 0.0, {}});
    }

    if (alive[k]) prev_end = note.end_sec;
  }

  // Insertion pass over gaps between surviving neighbours. Durations are
  // bootstrap draws from the input track; pitches are uniform in log
  // frequency over the track's range widened by two semitones.
  std::vector<NoteEvent> surviving;
  for (std::size_t k = 0; k < n; ++k)
    if (alive[k]) surviving.push_back(working[k]);

  std::vector<NoteEvent> inserted;
  if (!surviving.empty() && cfg.p_insert > 0.0) {
    double f_lo = std::numeric_limits<double>::infinity(), f_hi = 0.0;
    for (const auto& note : orig) {
      f_lo = std::min(f_lo, note.freq_hz);
      f_hi = std::max(f_hi, note.freq_hz);
    }
    const double log_lo =
        std::log2(std::max(f_lo * semitone_ratio(-2.0), f_floor * 1.0001));
    const double log_hi = std::log2(std::min(f_hi * semitone_ratio(2.0), f_ceil));

    for (std::size_t g = 0; g + 1 < surviving.size(); ++g) {
      if (rng.uniform() >= cfg.p_insert) continue;
      const double gap_start = surviving[g].end_sec;
      const double gap_len = surviving[g + 1].start_sec - gap_start;
      const double sampled_dur =
          orig[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1))]
              .duration();
      const double dur = std::min(sampled_dur, gap_len);
      const double offset_draw = rng.uniform();
      const double pitch_draw = rng.uniform();
      if (dur < cfg.min_duration_sec || log_hi <= log_lo) continue;
      NoteEvent ins;
      ins.start_sec = gap_start + offset_draw * (gap_len - dur);
      ins.end_sec = ins.start_sec + dur;
      ins.freq_hz = std::exp2(log_lo + pitch_draw * (log_hi - log_lo));
      inserted.push_back(ins);
      records.push_back({DeformKind::insert, -1, 0.0, ins});
    }
  }

  DeformResult out;
  out.track.track_id = input.track_id;
  out.track.notes = std::move(surviving);
  out.track.notes.insert(out.track.notes.end(), inserted.begin(), inserted.end());
  out.track.sort_by_start();
  out.records = std::move(records);
  return out;
}

NoteTrack apply_records(const NoteTrack& original,
                        const std::vector<DeformationRecord>& records) {
  std::vector<NoteEvent> working = original.notes;
  std::vector<bool> alive(working.size(), true);
  std::vector<NoteEvent> inserted;
  for (const auto& r : records) {
    switch (r.kind) {
      case DeformKind::onset:
        working.at(static_cast<std::size_t>(r.note_index)).start_sec += r.magnitude;
        break;
      case DeformKind::offset:
        working.at(static_cast<std::size_t>(r.note_index)).end_sec += r.magnitude;
        break;
      case DeformKind::pitch:
        working.at(static_cast<std::size_t>(r.note_index)).freq_hz *=
            semitone_ratio(r.magnitude);
        break;
      case DeformKind::erase:
        alive.at(static_cast<std::size_t>(r.note_index)) = false;
        break;
      case DeformKind::insert:
        inserted.push_back(r.inserted);
        break;
    }
  }
  NoteTrack out;
  out.track_id = original.track_id;
  for (std::size_t k = 0; k < working.size(); ++k)
    if (alive[k]) out.notes.push_back(working[k]);
  out.notes.insert(out.notes.end(), inserted.begin(), inserted.end());
  out.sort_by_start();
  return out;
}

std::vector<Index> diff_frames(const LabelMatrix& a, const LabelMatrix& b) {
  if (a.frames() != b.frames() || a.bins() != b.bins())
    throw std::invalid_argument("diff_frames: shape mismatch");
  std::vector<Index> out;
  for (Index i = 0; i < a.frames(); ++i)
    if ((a.data.row(i).array() != b.data.row(i).array()).any()) out.push_back(i);
  return out;
}

void write_records_jsonl(const std::filesystem::path& path,
                         const std::vector<DeformationRecord>& records) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  for (const auto& r : records) {
    json j;
    j["kind"] = to_string(r.kind);
    if (r.kind == DeformKind::insert) {
      j["note"] = {{"start_sec", r.inserted.start_sec},
                   {"end_sec", r.inserted.end_sec},
                   {"freq_hz", r.inserted.freq_hz}};
    } else {
      j["note_index"] = r.note_index;
      j["magnitude"] = r.magnitude;
    }
    f << j.dump() << '\n';
  }
  if (!f) throw DataError("write failed: " + path.string());
}

NegativeSampleResult sample_negatives(const NoteTrack& notes,
                                      const SpectrogramStack& stack,
                                      const LabelMatrix& labels, const TimeGrid& tg,
                                      const FrequencyGrid& fg,
                                      const DeformationConfig& cfg, int n_samples,
                                      int context, int max_retries) {
  cfg.validate();
  if (context <= 0) throw std::invalid_argument("sample_negatives: context must be > 0");
  const Index frames = labels.frames();
  if (stack.frames() != frames)
    throw std::invalid_argument("sample_negatives: stack/labels frame mismatch");
  if (frames <= 2 * static_cast<Index>(context) + 1)
    throw std::invalid_argument("sample_negatives: track shorter than one patch");

  NegativeSampleResult result;
  const Index lo = context, hi = frames - 1 - context;
  int budget = n_samples;

  for (int pass = 0; pass < cfg.passes && budget > 0; ++pass) {
    LabelMatrix deformed_labels;
    std::vector<Index> centers;
    for (int retry = 0; retry <= max_retries; ++retry) {
      DeformationConfig draw_cfg = cfg;
      draw_cfg.rng_seed = Rng::seed_mix(
          cfg.rng_seed, static_cast<std::uint64_t>(pass * (max_retries + 1) + retry));
      DeformResult deformed = deform_track(notes, draw_cfg);
      deformed_labels = rasterize(deformed.track, tg, fg, frames);
      centers.clear();
      for (Index i : diff_frames(labels, deformed_labels))
        if (i >= lo && i <= hi) centers.push_back(i);
      if (!centers.empty()) break;
    }
    if (centers.empty()) {
      ++result.warning_count;
      continue;
    }
    Rng sampler(Rng::seed_mix(cfg.rng_seed, 0x6e65676173ULL + static_cast<std::uint64_t>(pass)));
    sampler.shuffle(centers);
    const int take = std::min<int>(budget, static_cast<int>(centers.size()));
    for (int t = 0; t < take; ++t) {
      PatchExample ex;
      ex.patch = extract_patch(stack, deformed_labels, centers[static_cast<std::size_t>(t)],
                               context);
      ex.z = 1;
      ex.track_id = notes.track_id;
      result.examples.push_back(std::move(ex));
    }
    budget -= take;
  }
  if (result.examples.empty()) ++result.warning_count;
  return result;
}

}  // namespace notegate
