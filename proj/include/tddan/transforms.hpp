// Copyright 2026 The tddan Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <string>
#include <vector>

#include "tddan/common.hpp"

namespace tddan::dsp {

// Shared framing rule: zero-pad (N - hop) at both ends, then extend the right
// pad so the hop divides the padded span and every sample sits inside a full
// frame. Frame t covers padded samples [t*hop, t*hop + N).
struct Framing {
  int pad_left = 0;
  int padded_len = 0;
  int frames = 0;
};

Framing plan_framing(int source_len, int window_size, int hop);

struct ComplexSpectrogram {
  // frames x (F+1) bins, F = window_size / 2
  std::vector<std::complex<double>> data;
  int frames = 0;
  int bins = 0;
  int window_size = 0;
  int hop = 0;
  int source_len = 0;
  std::vector<double> window;

  std::complex<double>& at(int t, int f) { return data[static_cast<std::size_t>(t) * bins + f]; }
  std::complex<double> at(int t, int f) const {
    return data[static_cast<std::size_t>(t) * bins + f];
  }
};

std::vector<double> hann_window(int n);
std::vector<double> sqrt_hann_window(int n);
std::vector<double> rect_window(int n);
std::vector<double> make_window(const std::string& name, int n);

ComplexSpectrogram stft(const Waveform& x, int window_size, int hop,
                        const std::vector<double>& window);

/// Weighted overlap-add inverse; requires the window/hop pair to satisfy the
/// constant-overlap-add condition (checked, InvalidConfiguration otherwise).
Waveform istft(const ComplexSpectrogram& spec);

/// log(|X|^2 + floor), frames x bins.
Mat lps(const ComplexSpectrogram& spec, double floor = 1e-12);

Mat stft_magnitude(const ComplexSpectrogram& spec);

enum class KernelKind { StackedStft, Free };

struct AnalysisKernel {
  Mat weights;  // channels x kernel_size
  int hop = 0;
  KernelKind kind = KernelKind::Free;
  std::vector<double> window;  // analysis window for StackedStft, else empty

  int channels() const { return weights.rows; }
  int kernel_size() const { return weights.cols; }
};

/// Stacks the real and imaginary basis rows of an N-point transform:
/// [cos f=0..F, sin f=1..F-1], F = N/2, giving exactly N channels.
/// Row (cos,f)[n] = w[n]*cos(2*pi*n*f/N); row (sin,f)[n] = w[n]*sin(2*pi*n*f/N).
AnalysisKernel build_stacked_stft_kernel(int kernel_size, const std::vector<double>& window,
                                         int hop);

/// Synthesis counterpart of a stacked kernel: rows are the inverse-transform
/// columns re-windowed and scaled by the overlap-add constant, so that
/// decode(encode(x)) reproduces x.
AnalysisKernel build_synthesis_kernel(const AnalysisKernel& analysis);

struct Rep {
  Mat data;  // frames x channels
  int hop = 0;
  int kernel_size = 0;
  int source_len = 0;

  int frames() const { return data.rows; }
  int channels() const { return data.cols; }
};

Rep encode(const Waveform& x, const AnalysisKernel& kernel);

/// Transposed-convolution overlap-add, trimmed back to the source length.
Waveform decode(const Rep& rep, const AnalysisKernel& kernel);

Mat magnitude(const Rep& rep);

}  // namespace tddan::dsp
