// Copyright 2026 The tddan Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tddan/scene.hpp"

#include <algorithm>
#include <cmath>

namespace tddan::scene {

Rir Rir::from_taps(std::vector<double> taps, int sample_rate, double t60) {
  if (taps.empty()) throw InvalidArgument("Rir: empty taps");
  if (sample_rate <= 0) throw InvalidArgument("Rir: sample rate must be positive");
  Rir rir;
  rir.taps = std::move(taps);
  rir.sample_rate = sample_rate;
  rir.t60 = t60;

  double peak = 0.0;
  for (double v : rir.taps) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) throw InvalidArgument("Rir: all-zero impulse response");
  const double threshold = peak / 10.0;
  int start = 0;
  while (start < static_cast<int>(rir.taps.size()) && std::abs(rir.taps[start]) <= threshold)
    ++start;
  rir.start_index = start;

  const int early_len = static_cast<int>(std::lround(0.050 * sample_rate));
  rir.early_end_index =
      std::min<int>(start + early_len, static_cast<int>(rir.taps.size()));
  return rir;
}

Rir synth_rir(double t60_s, double length_s, int sample_rate, int direct_delay,
              std::uint64_t seed) {
  if (sample_rate <= 0) throw InvalidArgument("synth_rir: sample rate must be positive");
  if (t60_s <= 0.05) throw InvalidArgument("synth_rir: t60 must exceed 50 ms");
  if (length_s < t60_s) throw InvalidArgument("synth_rir: length must cover t60");
  if (direct_delay < 0) throw InvalidArgument("synth_rir: direct delay must be non-negative");

  const int n_taps = static_cast<int>(std::lround(length_s * sample_rate));
  if (direct_delay >= n_taps) throw InvalidArgument("synth_rir: direct delay beyond the response");

  std::vector<double> taps(n_taps, 0.0);
  taps[direct_delay] = 1.0;

  // envelope decays by 60 dB over t60: exp(-3*ln(10)*n/(fs*t60))
  const double decay = 3.0 * std::log(10.0) / (sample_rate * t60_s);
  const double tail_rms = 0.5;
  GaussianSampler gauss(seed);
  for (int n = direct_delay + 1; n < n_taps; ++n) {
    const double env = std::exp(-decay * static_cast<double>(n - direct_delay));
    taps[n] = tail_rms * env * gauss();
  }
  return Rir::from_taps(std::move(taps), sample_rate, t60_s);
}

RirSplit split_rir(const Rir& rir) {
  RirSplit split;
  split.early_taps = rir.taps;
  split.late_taps.assign(rir.taps.size(), 0.0);
  for (std::size_t i = rir.early_end_index; i < rir.taps.size(); ++i) {
    split.late_taps[i] = rir.taps[i];
    split.early_taps[i] = 0.0;
  }
  return split;
}

Waveform render(const SourceSignal& source, const std::vector<double>& taps) {
  if (taps.empty()) throw InvalidArgument("render: empty taps");
  const std::size_t n = source.samples.size();
  Waveform out(n, 0.0);
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const double tap = taps[i];
    if (tap == 0.0) continue;
    const std::size_t limit = n - std::min(n, i);
    for (std::size_t s = 0; s < limit; ++s) out[s + i] += tap * source.samples[s];
  }
  return out;
}

MixtureScene mix_scene(const std::vector<SourceSignal>& sources, const std::vector<Rir>& rirs,
                       double sir_db, std::optional<double> snr_db, std::uint64_t seed) {
  const int K = static_cast<int>(sources.size());
  if (K < 1) throw InvalidArgument("mix_scene: need at least one source");
  if (rirs.size() != sources.size())
    throw InvalidArgument("mix_scene: sources and rirs must pair up");
  const int fs = sources[0].sample_rate;
  const std::size_t n = sources[0].samples.size();
  for (const auto& s : sources)
    if (s.sample_rate != fs || s.samples.size() != n)
      throw InvalidArgument("mix_scene: sources must share sample rate and length");
  for (const auto& r : rirs)
    if (r.sample_rate != fs) throw InvalidArgument("mix_scene: rir sample rate mismatch");

  MixtureScene scene;
  scene.sources = sources;
  scene.rirs = rirs;
  scene.sir_db = sir_db;
  scene.snr_db = snr_db;
  scene.seed = seed;
  scene.num_speakers = K;
  scene.sample_rate = fs;

  scene.early.resize(K);
  scene.late.resize(K);
  scene.reverberant.resize(K);
  for (int k = 0; k < K; ++k) {
    const RirSplit split = split_rir(rirs[k]);
    scene.early[k] = render(sources[k], split.early_taps);
    scene.late[k] = render(sources[k], split.late_taps);
    scene.reverberant[k].resize(n);
    for (std::size_t i = 0; i < n; ++i)
      scene.reverberant[k][i] = scene.early[k][i] + scene.late[k][i];
  }

  const double ref_power = signal_power(scene.reverberant[0]);
  if (ref_power <= 0.0) throw DegenerateSource("mix_scene: reference speaker has zero power");
  for (int k = 1; k < K; ++k) {
    const double p_k = signal_power(scene.reverberant[k]);
    if (p_k <= 0.0)
      throw DegenerateSource("mix_scene: speaker " + std::to_string(k + 1) + " has zero power");
    const double gain = std::sqrt(ref_power / (p_k * std::pow(10.0, sir_db / 10.0)));
    for (std::size_t i = 0; i < n; ++i) {
      scene.early[k][i] *= gain;
      scene.late[k][i] *= gain;
      scene.reverberant[k][i] *= gain;
    }
  }

  Waveform noiseless(n, 0.0);
  for (int k = 0; k < K; ++k)
    for (std::size_t i = 0; i < n; ++i) noiseless[i] += scene.reverberant[k][i];

  scene.noise.assign(n, 0.0);
  if (snr_db.has_value()) {
    GaussianSampler gauss(splitmix64(seed ^ 0xA5A5A5A5A5A5A5A5ULL));
    for (std::size_t i = 0; i < n; ++i) scene.noise[i] = gauss();
    const double p_signal = signal_power(noiseless);
    const double p_noise = signal_power(scene.noise);
    const double gain = std::sqrt(p_signal / (p_noise * std::pow(10.0, *snr_db / 10.0)));
    for (double& v : scene.noise) v *= gain;
  }

  scene.mixture.resize(n);
  for (std::size_t i = 0; i < n; ++i) scene.mixture[i] = noiseless[i] + scene.noise[i];
  return scene;
}

SceneParams sample_scene_params(std::uint64_t master_seed, std::uint64_t index,
                                int num_speakers, int sample_rate) {
  SceneParams params;
  params.scene_seed = derive_seed(master_seed, index);
  GaussianSampler rng(params.scene_seed);
  params.t60_s = rng.uniform_in(0.2, 0.5);
  params.sir_db = rng.uniform_in(-5.0, 5.0);
  params.snr_db = rng.uniform_in(20.0, 30.0);
  for (int k = 0; k < num_speakers; ++k) {
    params.speaker_seeds.push_back(rng.next_u64());
    // direct-path delay 1..5 ms, mimicking source-microphone distance
    const int lo = std::max(1, sample_rate / 1000);
    const int hi = std::max(lo + 1, 5 * sample_rate / 1000);
    params.direct_delays.push_back(lo + static_cast<int>(rng.next_u64() % (hi - lo + 1)));
  }
  return params;
}

SourceSignal make_ar2_source(double duration_s, int sample_rate, std::uint64_t seed,
                             const std::string& speaker_id) {
  const int n = static_cast<int>(std::lround(duration_s * sample_rate));
  if (n <= 0) throw InvalidArgument("make_ar2_source: duration too short");
  GaussianSampler rng(seed);
  Waveform x(n, 0.0);

  int pos = 0;
  bool voiced = true;  // always start with a burst so the source has power
  while (pos < n) {
    const int seg_len = voiced
                            ? static_cast<int>(rng.uniform_in(0.2, 0.5) * sample_rate)
                            : static_cast<int>(rng.uniform_in(0.05, 0.2) * sample_rate);
    const int end = std::min(n, pos + std::max(1, seg_len));
    if (voiced) {
      // resonant AR(2): pole radius below 1, center frequency varies per burst
      const double radius = rng.uniform_in(0.90, 0.97);
      const double theta = rng.uniform_in(0.05, 0.6) * M_PI;
      const double a1 = 2.0 * radius * std::cos(theta);
      const double a2 = -radius * radius;
      double y1 = 0.0, y2 = 0.0;
      for (int i = pos; i < end; ++i) {
        const double y = a1 * y1 + a2 * y2 + rng();
        x[i] = y;
        y2 = y1;
        y1 = y;
      }
      // short cosine fades to avoid clicks at burst edges
      const int fade = std::min(64, (end - pos) / 4);
      for (int i = 0; i < fade; ++i) {
        const double g = 0.5 - 0.5 * std::cos(M_PI * (i + 1) / (fade + 1));
        x[pos + i] *= g;
        x[end - 1 - i] *= g;
      }
    }
    pos = end;
    voiced = !voiced;
  }

  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) throw DegenerateSource("make_ar2_source: silent draw");
  const double gain = 0.9 / peak;
  for (double& v : x) v *= gain;

  SourceSignal src;
  src.samples = std::move(x);
  src.sample_rate = sample_rate;
  src.speaker_id = speaker_id;
  return src;
}

double measured_ratio_db(const Waveform& reference, const Waveform& other) {
  return power_db(signal_power(reference), signal_power(other));
}

}  // namespace tddan::scene
