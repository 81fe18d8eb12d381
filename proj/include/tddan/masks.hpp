// Copyright 2026 The tddan Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "tddan/common.hpp"
#include "tddan/transforms.hpp"

namespace tddan::masks {

enum class MaskKind { Ibm, Irm, Wfm, Mrm, Td };

/// Per-speaker mask planes, each frames x channels.
struct MaskTensor {
  std::vector<Mat> planes;
  MaskKind kind = MaskKind::Ibm;

  int speakers() const { return static_cast<int>(planes.size()); }
};

/// Binary speech-presence gate, frames x channels.
struct PresenceMask {
  Mat data;

  int count() const {
    int n = 0;
    for (double v : data.data) n += (v != 0.0);
    return n;
  }
};

/// Binary dominance masks: plane k is 1 where |d_k| strictly exceeds the sum
/// of all other magnitudes; exact ties assign nobody.
MaskTensor ibm(const std::vector<Mat>& magnitudes);

/// Dominance masks on a learned/stacked representation: encode each early
/// waveform, take magnitudes, then apply the same rule channelwise.
MaskTensor ibm_rep(const dsp::AnalysisKernel& encoder, const std::vector<Waveform>& early);

/// Separation-only ratio mask: |y_k| / (sum_q |y_q| + |n|).
MaskTensor irm(const std::vector<Mat>& reverberant_mags, const Mat& noise_mag);

/// Separation+dereverberation ratio mask: |d_k| / (|y - d_k| + |d_k|), with
/// the interference term formed by complex subtraction.
Mat irm_derevb(const dsp::ComplexSpectrogram& early_k, const dsp::ComplexSpectrogram& mixture);

/// Square-magnitude analogue of irm under a square root.
MaskTensor wfm(const std::vector<Mat>& reverberant_mags, const Mat& noise_mag);

Mat wfm_derevb(const dsp::ComplexSpectrogram& early_k, const dsp::ComplexSpectrogram& mixture);

/// Keeps the ceil(T*C*top_percent/100) largest-power bins; ties broken by
/// (frame, channel) order so the gate is reproducible.
PresenceMask speech_presence(const Mat& power, double top_percent);

}  // namespace tddan::masks
