// Copyright 2026 The tddan Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <functional>
#include <vector>

#include "tddan/common.hpp"

namespace tddan::metrics {

/// Scale-invariant source-to-distortion ratio in dB.
double si_sdr(const Waveform& estimate, const Waveform& reference);

/// SDR after least-squares projection of the estimate onto the subspace
/// spanned by the reference delayed by 0..filter_len-1 samples.
double sdr_projective(const Waveform& estimate, const Waveform& reference, int filter_len);

using MetricFn = std::function<double(const Waveform&, const Waveform&)>;

struct Alignment {
  std::vector<int> permutation;  // estimate index assigned to each reference
  std::vector<double> scores;    // per reference, under that permutation
  double mean_score = 0.0;
};

/// Exhaustive permutation search maximizing the mean metric; K <= 4.
Alignment eval_align(const std::vector<Waveform>& estimates,
                     const std::vector<Waveform>& references, const MetricFn& metric);

double median(std::vector<double> values);

}  // namespace tddan::metrics
