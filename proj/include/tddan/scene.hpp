// Copyright 2026 The tddan Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tddan/common.hpp"

namespace tddan::scene {

/// Room impulse response with the early/late split bookkeeping.
/// The early window spans [start_index, early_end_index), exactly 50 ms.
struct Rir {
  std::vector<double> taps;
  int sample_rate = 0;
  int start_index = 0;      // first tap with |tap| > max(|taps|)/10
  int early_end_index = 0;  // start_index + round(0.050 * sample_rate), clamped to len
  double t60 = 0.0;

  static Rir from_taps(std::vector<double> taps, int sample_rate, double t60);
};

struct SourceSignal {
  Waveform samples;  // in [-1, 1]
  int sample_rate = 0;
  std::string speaker_id;
};

struct MixtureScene {
  std::vector<SourceSignal> sources;
  std::vector<Rir> rirs;
  std::vector<Waveform> early;         // per speaker
  std::vector<Waveform> late;          // per speaker
  std::vector<Waveform> reverberant;   // early + late, per speaker
  Waveform noise;
  Waveform mixture;
  double sir_db = 0.0;
  std::optional<double> snr_db;  // nullopt = noise disabled
  std::uint64_t seed = 0;
  int num_speakers = 0;
  int sample_rate = 0;
};

/// Unit impulse plus an exponentially decaying Gaussian tail whose envelope
/// falls by 60 dB at exactly t60. Tail RMS at the direct path is half the
/// direct amplitude. Deterministic given the seed.
Rir synth_rir(double t60_s, double length_s, int sample_rate, int direct_delay,
              std::uint64_t seed);

struct RirSplit {
  std::vector<double> early_taps;
  std::vector<double> late_taps;
};

/// Zeroes everything at index >= early_end_index into the early part;
/// early + late == taps exactly.
RirSplit split_rir(const Rir& rir);

/// Linear convolution truncated to the source length.
Waveform render(const SourceSignal& source, const std::vector<double>& taps);

/// Builds a scene: speaker 1 is the ratio reference, interferers are
/// gain-scaled to the requested SIR, white noise scaled to the requested SNR
/// against the noiseless mixture. snr_db == nullopt disables noise.
MixtureScene mix_scene(const std::vector<SourceSignal>& sources, const std::vector<Rir>& rirs,
                       double sir_db, std::optional<double> snr_db, std::uint64_t seed);

struct SceneParams {
  double t60_s = 0.0;
  double sir_db = 0.0;
  double snr_db = 0.0;
  std::uint64_t scene_seed = 0;
  std::vector<std::uint64_t> speaker_seeds;
  std::vector<int> direct_delays;  // samples
};

/// Deterministic per-scene parameter draw: t60 ~ U[0.2, 0.5] s,
/// SIR ~ U[-5, 5] dB, SNR ~ U[20, 30] dB.
SceneParams sample_scene_params(std::uint64_t master_seed, std::uint64_t index,
                                int num_speakers, int sample_rate);

/// Synthetic broadband source: AR(2)-filtered noise bursts separated by
/// silence gaps, peak-normalized. Stands in for speech at desk scale.
SourceSignal make_ar2_source(double duration_s, int sample_rate, std::uint64_t seed,
                             const std::string& speaker_id);

/// Realized power ratio of two waveforms in dB (reference first).
double measured_ratio_db(const Waveform& reference, const Waveform& other);

}  // namespace tddan::scene
