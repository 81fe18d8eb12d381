// Copyright 2026 The tddan Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tddan/masks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tddan::masks {

namespace {

void check_same_shape(const std::vector<Mat>& mags) {
  if (mags.empty()) throw InvalidArgument("masks: need at least one speaker");
  for (const auto& m : mags)
    if (!m.same_shape(mags[0])) throw InvalidArgument("masks: magnitude shapes differ");
}

}  // namespace

MaskTensor ibm(const std::vector<Mat>& magnitudes) {
  check_same_shape(magnitudes);
  const int K = static_cast<int>(magnitudes.size());
  MaskTensor out;
  out.kind = MaskKind::Ibm;
  out.planes.assign(K, Mat(magnitudes[0].rows, magnitudes[0].cols));
  const std::size_t n = magnitudes[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (int k = 0; k < K; ++k) total += std::abs(magnitudes[k].data[i]);
    for (int k = 0; k < K; ++k) {
      const double own = std::abs(magnitudes[k].data[i]);
      out.planes[k].data[i] = (own > total - own) ? 1.0 : 0.0;
    }
  }
  return out;
}

MaskTensor ibm_rep(const dsp::AnalysisKernel& encoder, const std::vector<Waveform>& early) {
  std::vector<Mat> mags;
  mags.reserve(early.size());
  for (const auto& wave : early) mags.push_back(dsp::magnitude(dsp::encode(wave, encoder)));
  return ibm(mags);
}

MaskTensor irm(const std::vector<Mat>& reverberant_mags, const Mat& noise_mag) {
  check_same_shape(reverberant_mags);
  if (!noise_mag.same_shape(reverberant_mags[0]))
    throw InvalidArgument("irm: noise magnitude shape differs");
  const int K = static_cast<int>(reverberant_mags.size());
  MaskTensor out;
  out.kind = MaskKind::Irm;
  out.planes.assign(K, Mat(noise_mag.rows, noise_mag.cols));
  const std::size_t n = noise_mag.size();
  for (std::size_t i = 0; i < n; ++i) {
    double den = noise_mag.data[i];
    for (int k = 0; k < K; ++k) den += reverberant_mags[k].data[i];
    for (int k = 0; k < K; ++k)
      out.planes[k].data[i] = den > 0.0 ? reverberant_mags[k].data[i] / den : 0.0;
  }
  return out;
}

Mat irm_derevb(const dsp::ComplexSpectrogram& early_k, const dsp::ComplexSpectrogram& mixture) {
  if (early_k.frames != mixture.frames || early_k.bins != mixture.bins)
    throw InvalidArgument("irm_derevb: spectrogram shapes differ");
  Mat out(mixture.frames, mixture.bins);
  for (int t = 0; t < mixture.frames; ++t) {
    for (int f = 0; f < mixture.bins; ++f) {
      const double target = std::abs(early_k.at(t, f));
      const double interference = std::abs(mixture.at(t, f) - early_k.at(t, f));
      const double den = target + interference;
      out.at(t, f) = den > 0.0 ? target / den : 0.0;
    }
  }
  return out;
}

MaskTensor wfm(const std::vector<Mat>& reverberant_mags, const Mat& noise_mag) {
  check_same_shape(reverberant_mags);
  if (!noise_mag.same_shape(reverberant_mags[0]))
    throw InvalidArgument("wfm: noise magnitude shape differs");
  const int K = static_cast<int>(reverberant_mags.size());
  MaskTensor out;
  out.kind = MaskKind::Wfm;
  out.planes.assign(K, Mat(noise_mag.rows, noise_mag.cols));
  const std::size_t n = noise_mag.size();
  for (std::size_t i = 0; i < n; ++i) {
    double den = noise_mag.data[i] * noise_mag.data[i];
    for (int k = 0; k < K; ++k) den += reverberant_mags[k].data[i] * reverberant_mags[k].data[i];
    for (int k = 0; k < K; ++k) {
      const double num = reverberant_mags[k].data[i] * reverberant_mags[k].data[i];
      out.planes[k].data[i] = den > 0.0 ? std::sqrt(num / den) : 0.0;
    }
  }
  return out;
}

Mat wfm_derevb(const dsp::ComplexSpectrogram& early_k, const dsp::ComplexSpectrogram& mixture) {
  if (early_k.frames != mixture.frames || early_k.bins != mixture.bins)
    throw InvalidArgument("wfm_derevb: spectrogram shapes differ");
  Mat out(mixture.frames, mixture.bins);
  for (int t = 0; t < mixture.frames; ++t) {
    for (int f = 0; f < mixture.bins; ++f) {
      const double target = std::norm(early_k.at(t, f));
      const double interference = std::norm(mixture.at(t, f) - early_k.at(t, f));
      const double den = target + interference;
      out.at(t, f) = den > 0.0 ? std::sqrt(target / den) : 0.0;
    }
  }
  return out;
}

PresenceMask speech_presence(const Mat& power, double top_percent) {
  if (top_percent <= 0.0 || top_percent > 100.0)
    throw InvalidArgument("speech_presence: top_percent must be in (0, 100]");
  const std::size_t n = power.size();
  const std::size_t keep = static_cast<std::size_t>(
      std::ceil(static_cast<double>(n) * top_percent / 100.0));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&power](std::size_t a, std::size_t b) {
    if (power.data[a] != power.data[b]) return power.data[a] > power.data[b];
    return a < b;  // lexicographic (frame, channel) tie-break
  });

  PresenceMask mask;
  mask.data = Mat(power.rows, power.cols);
  for (std::size_t i = 0; i < keep && i < n; ++i) mask.data.data[order[i]] = 1.0;
  return mask;
}

}  // namespace tddan::masks
